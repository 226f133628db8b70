"""Numerical verification of the update theory.

Three families of checks, each with an oracle independent of the training
code:

* KL budget bounds for the direct and es target rules, against closed-form
  bounds and Monte Carlo estimates.
* The expected-update identities: the es-rule targets perform, in
  expectation, gradient ascent on the Gaussian-smoothed success probability
  G(mu, sigma) = E[1{Q(a) > V}]. Checked by Monte Carlo versus central
  finite differences with common random numbers.
* Fixed-point residuals of the expected update under a fixed critic,
  evaluated by adaptive Simpson quadrature (no Monte Carlo), with the
  domain D = {Q > V} located by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

__all__ = [
    "FitnessSpec",
    "quadratic_spec",
    "half_line_spec",
    "double_well_spec",
    "success_indicators",
    "eval_G",
    "expected_target",
    "IdentityCheck",
    "verify_expected_updates",
    "verify_score_identities",
    "adaptive_simpson",
    "find_region",
    "fixed_point_residual",
    "expected_update_quadrature",
    "iterate_expected_update",
    "direct_kl_samples",
    "direct_kl_closed_bound",
    "es_expected_kl",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


# ---------------------------------------------------------------------------
# fitness specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitnessSpec:
    """A fixed action-value function Q and baseline V.

    q maps an (n, d) action array to (n,) values. The success region is
    D = {a : Q(a) > V}. For d=1 quadrature an explicit region (lo, hi) may
    be supplied to bypass root-finding (useful when the boundary is known
    in closed form, e.g. symmetric cases); np.inf endpoints are allowed and
    clipped to the integration window.
    """

    name: str
    q: object
    v: float
    region: tuple | None = None


def quadratic_spec() -> FitnessSpec:
    """Q(a) = -||a||^2, V = -1: success inside the unit interval/ball."""
    return FitnessSpec("quadratic", lambda a: -np.sum(a * a, axis=-1), -1.0, region=(-1.0, 1.0))


def quadratic_spec_nd() -> FitnessSpec:
    """The quadratic spec without the d=1 region annotation (for d > 1)."""
    return FitnessSpec("quadratic-nd", lambda a: -np.sum(a * a, axis=-1), -1.0)


def half_line_spec() -> FitnessSpec:
    """Q(a) = a, V = 0: success on the positive half-line (d = 1)."""
    return FitnessSpec("half-line", lambda a: a[..., 0], 0.0, region=(0.0, np.inf))


def double_well_spec() -> FitnessSpec:
    """Q(a) = -(a^2-1)^2, V = -0.5: success on two disjoint intervals (d = 1).

    Exercises the multi-component region path; boundaries are found by
    root-finding, not given.
    """
    return FitnessSpec("double-well", lambda a: -((a[..., 0] ** 2 - 1.0) ** 2), -0.5)


# ---------------------------------------------------------------------------
# Monte Carlo: G and the expected targets
# ---------------------------------------------------------------------------

def success_indicators(spec: FitnessSpec, mu, sigma, noise) -> np.ndarray:
    """1{Q(mu + y*sigma) > V} for each row y of noise."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    actions = mu + noise * sigma
    return (spec.q(actions) > spec.v).astype(np.float64)


def eval_G(spec: FitnessSpec, mu, sigma, n_samples: int, rng: np.random.Generator):
    """Monte Carlo estimate of G(mu, sigma) with its standard error."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    y = rng.standard_normal((n_samples, mu.shape[0]))
    ind = success_indicators(spec, mu, sigma, y)
    est = float(np.mean(ind))
    se = float(np.std(ind, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return est, se


def expected_target(spec: FitnessSpec, mu, sigma, nu: float, n_samples: int,
                    rng: np.random.Generator):
    """Monte Carlo estimate of the one-step expected target parameters.

    Per draw, the indicator-gated rules give
        mu_hat    = mu + nu*1{success}*(a - mu)
        sigma_hat^2 = 1{success}*(a - mu)^2 + (1 - 1{success})*sigma^2
    Returns (mu_prime, sigma_prime_sq, se_mu, se_sigma_sq), each length d.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    y = rng.standard_normal((n_samples, mu.shape[0]))
    ind = success_indicators(spec, mu, sigma, y)[:, None]
    offset = y * sigma
    mu_samples = mu + nu * ind * offset
    var_samples = ind * offset**2 + (1.0 - ind) * sigma**2
    root_n = np.sqrt(n_samples)
    return (
        mu_samples.mean(axis=0),
        var_samples.mean(axis=0),
        mu_samples.std(axis=0, ddof=1) / root_n,
        var_samples.std(axis=0, ddof=1) / root_n,
    )


# ---------------------------------------------------------------------------
# expected-update identity checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    """Left/right sides of a vector identity with combined standard errors."""

    lhs: np.ndarray
    rhs: np.ndarray
    se: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def sigmas(self) -> np.ndarray:
        """Residual size in units of the combined standard error."""
        return np.abs(self.residual) / np.maximum(self.se, 1e-300)

    def passed(self, k: float = 3.0) -> bool:
        return bool(np.all(self.sigmas <= k))


def _fd_grad_G(spec, mu, sigma, noise, fd_step):
    """Central finite differences of G in mu and in sigma^2, common draws.

    Returns (grad_mu, se_mu, grad_var, se_var), each length d. The same
    noise matrix is used at every stencil point so the difference estimator
    has variance driven only by draws that flip the indicator.
    """
    d = mu.shape[0]
    n = noise.shape[0]
    grad_mu = np.empty(d)
    se_mu = np.empty(d)
    grad_var = np.empty(d)
    se_var = np.empty(d)
    for i in range(d):
        h = fd_step * sigma[i]
        e = np.zeros(d)
        e[i] = h
        diff = (
            success_indicators(spec, mu + e, sigma, noise)
            - success_indicators(spec, mu - e, sigma, noise)
        )
        grad_mu[i] = float(np.mean(diff)) / (2 * h)
        se_mu[i] = float(np.std(diff, ddof=1)) / np.sqrt(n) / (2 * h)

        v = sigma[i] ** 2
        hv = fd_step * v
        sig_plus = sigma.copy()
        sig_minus = sigma.copy()
        sig_plus[i] = np.sqrt(v + hv)
        sig_minus[i] = np.sqrt(v - hv)
        diff = (
            success_indicators(spec, mu, sig_plus, noise)
            - success_indicators(spec, mu, sig_minus, noise)
        )
        grad_var[i] = float(np.mean(diff)) / (2 * hv)
        se_var[i] = float(np.std(diff, ddof=1)) / np.sqrt(n) / (2 * hv)
    return grad_mu, se_mu, grad_var, se_var


def verify_expected_updates(spec: FitnessSpec, mu, sigma, nu: float,
                           n_samples: int, fd_step: float,
                           rng: np.random.Generator):
    """Check that the expected es-rule update is gradient ascent on G.

    Identities verified:
        mu' - mu          = nu * sigma^2 * dG/dmu
        (sigma')^2 - sigma^2 = 2 * sigma^4 * dG/d(sigma^2)
    Left sides by Monte Carlo expected_target, right sides by central finite
    differences of G with common random numbers. Returns a pair of
    IdentityCheck (mean equation, variance equation).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    mu_prime, var_prime, se_mu_lhs, se_var_lhs = expected_target(
        spec, mu, sigma, nu, n_samples, rng
    )
    noise = rng.standard_normal((n_samples, mu.shape[0]))
    grad_mu, se_gmu, grad_var, se_gvar = _fd_grad_G(spec, mu, sigma, noise, fd_step)

    lhs_mu = mu_prime - mu
    rhs_mu = nu * sigma**2 * grad_mu
    se_mu = np.sqrt(se_mu_lhs**2 + (nu * sigma**2 * se_gmu) ** 2)

    lhs_var = var_prime - sigma**2
    rhs_var = 2.0 * sigma**4 * grad_var
    se_var = np.sqrt(se_var_lhs**2 + (2.0 * sigma**4 * se_gvar) ** 2)
    return IdentityCheck(lhs_mu, rhs_mu, se_mu), IdentityCheck(lhs_var, rhs_var, se_var)


def verify_score_identities(f, mu, sigma, n_samples: int, fd_step: float,
                            rng: np.random.Generator):
    """Check the Gaussian smoothing gradient identities on a smooth f.

        d/dmu      E[f(mu + y*sigma)] = (1/sigma)   * E[y * f]
        d/d(sigma^2) E[f(mu + y*sigma)] = (1/2sigma^2) * E[(y^2 - 1) * f]

    f maps (n, d) arrays to (n,). Left sides by central finite differences,
    right sides by Monte Carlo; one shared noise matrix throughout (common
    random numbers). Returns a pair of IdentityCheck.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    d = mu.shape[0]
    y = rng.standard_normal((n_samples, d))
    root_n = np.sqrt(n_samples)
    fvals = f(mu + y * sigma)

    rhs_mu_samples = y * fvals[:, None] / sigma
    rhs_var_samples = (y**2 - 1.0) * fvals[:, None] / (2.0 * sigma**2)

    lhs_mu = np.empty(d)
    se_fd_mu = np.empty(d)
    lhs_var = np.empty(d)
    se_fd_var = np.empty(d)
    for i in range(d):
        h = fd_step * sigma[i]
        e = np.zeros(d)
        e[i] = h
        diff = f(mu + e + y * sigma) - f(mu - e + y * sigma)
        lhs_mu[i] = float(np.mean(diff)) / (2 * h)
        se_fd_mu[i] = float(np.std(diff, ddof=1)) / root_n / (2 * h)

        v = sigma[i] ** 2
        hv = fd_step * v
        sig_plus = sigma.copy()
        sig_minus = sigma.copy()
        sig_plus[i] = np.sqrt(v + hv)
        sig_minus[i] = np.sqrt(v - hv)
        diff = f(mu + y * sig_plus) - f(mu + y * sig_minus)
        lhs_var[i] = float(np.mean(diff)) / (2 * hv)
        se_fd_var[i] = float(np.std(diff, ddof=1)) / root_n / (2 * hv)

    se_mu = np.sqrt(se_fd_mu**2 + (rhs_mu_samples.std(axis=0, ddof=1) / root_n) ** 2)
    se_var = np.sqrt(se_fd_var**2 + (rhs_var_samples.std(axis=0, ddof=1) / root_n) ** 2)
    return (
        IdentityCheck(lhs_mu, rhs_mu_samples.mean(axis=0), se_mu),
        IdentityCheck(lhs_var, rhs_var_samples.mean(axis=0), se_var),
    )


# ---------------------------------------------------------------------------
# quadrature (d = 1)
# ---------------------------------------------------------------------------

def _simpson(a, b, fa, fm, fb):
    return (b - a) * (fa + 4.0 * fm + fb) / 6.0


def _adapt(f, a, m, b, fa, fm, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(a, m, fa, flm, fm)
    right = _simpson(m, b, fm, frm, fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _adapt(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + _adapt(
        f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1
    )


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    Subintervals are always combined as left + right, so an odd integrand
    over an interval symmetric about a floating-point-exact midpoint
    integrates to exactly 0.0 (mirrored evaluations cancel bit-for-bit).
    """
    if not b >= a:
        raise ValueError("need b >= a")
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    return _adapt(f, a, m, b, fa, fm, fb, _simpson(a, b, fa, fm, fb), tol, max_depth)


def find_region(spec: FitnessSpec, mu: float, sigma: float,
                n_scan: int = 4096, xtol: float = 1e-10):
    """Locate D = {Q > V} within the mass window [mu-12sigma, mu+12sigma].

    Uses the explicit spec.region when given (clipped to the window);
    otherwise scans for sign changes of Q - V and bisects each bracket.
    Returns a list of (lo, hi) components; raises if D misses the window.
    """
    lo_w = mu - 12.0 * sigma
    hi_w = mu + 12.0 * sigma
    if spec.region is not None:
        lo, hi = spec.region
        lo = lo if np.isfinite(lo) else lo_w
        hi = hi if np.isfinite(hi) else hi_w
        if hi <= lo:
            raise ValueError("explicit region is empty")
        return [(float(lo), float(hi))]

    grid = np.linspace(lo_w, hi_w, n_scan)
    g = spec.q(grid[:, None]) - spec.v

    def scalar_g(x):
        return float(spec.q(np.array([[x]]))[0]) - spec.v

    edges = [lo_w]
    for i in range(n_scan - 1):
        if g[i] == 0.0 or g[i] * g[i + 1] < 0.0:
            if g[i] == 0.0:
                root = grid[i]
            else:
                root = bisect(scalar_g, grid[i], grid[i + 1], xtol=xtol)
            edges.append(float(root))
    edges.append(hi_w)

    components = []
    for left, right in zip(edges[:-1], edges[1:]):
        if right - left <= 0:
            continue
        if scalar_g(0.5 * (left + right)) > 0.0:
            components.append((left, right))
    if not components:
        raise ValueError(
            f"success region of {spec.name!r} is numerically empty in "
            f"[{lo_w:.3g}, {hi_w:.3g}]"
        )
    return components


def _region_integral(components, f, tol):
    return sum(adaptive_simpson(f, lo, hi, tol=tol) for lo, hi in components)


def fixed_point_residual(spec: FitnessSpec, mu: float, sigma: float,
                         tol: float = 1e-8):
    """Residuals of the expected-update fixed-point equations (d = 1).

    With f(x) = exp(-(x-mu)^2 / 2 sigma^2) and D the success region:
        r_mu    = mu      - (int_D x f) / (int_D f)
        r_sigma = sigma^2 - (int_D (x-mu)^2 f) / (int_D f)
    Quadrature only; no Monte Carlo. Raises when D carries no mass.
    """
    mu = float(mu)
    sigma = float(sigma)
    components = find_region(spec, mu, sigma)
    inv2v = 1.0 / (2.0 * sigma * sigma)

    def f0(x):
        return np.exp(-((x - mu) ** 2) * inv2v)

    def fx(x):
        return x * np.exp(-((x - mu) ** 2) * inv2v)

    def fxx(x):
        return (x - mu) ** 2 * np.exp(-((x - mu) ** 2) * inv2v)

    mass = _region_integral(components, f0, tol)
    if mass <= 0.0 or not np.isfinite(mass):
        raise ValueError("success region carries no numerical mass; degenerate case")
    r_mu = mu - _region_integral(components, fx, tol) / mass
    r_sigma = sigma * sigma - _region_integral(components, fxx, tol) / mass
    return r_mu, r_sigma


def expected_update_quadrature(spec: FitnessSpec, mu: float, sigma: float,
                               nu: float, tol: float = 1e-8):
    """One-step expected update via the derivative-form integrals (d = 1).

    Independent route to the same quantities expected_target estimates:
        mu' - mu          = -(nu*sigma/sqrt(2pi)) * int_D f'(x) dx
        (sigma')^2 - sigma^2 = (sigma^3/sqrt(2pi)) * int_D f''(x) dx
    with f the unnormalized Gaussian kernel. These follow from moving the
    gradients of the smoothed objective onto the kernel.
    """
    mu = float(mu)
    sigma = float(sigma)
    components = find_region(spec, mu, sigma)
    v = sigma * sigma
    inv2v = 1.0 / (2.0 * v)

    def fprime(x):
        z = x - mu
        return -(z / v) * np.exp(-z * z * inv2v)

    def fsecond(x):
        z = x - mu
        return (z * z / (v * v) - 1.0 / v) * np.exp(-z * z * inv2v)

    d_mu = -(nu * sigma / _SQRT_2PI) * _region_integral(components, fprime, tol)
    d_var = (sigma**3 / _SQRT_2PI) * _region_integral(components, fsecond, tol)
    return d_mu, d_var


def iterate_expected_update(spec: FitnessSpec, mu0: float, sigma0: float,
                            steps: int, nu: float = 1.0, tol: float = 1e-10):
    """Iterate the d=1 expected-update map by quadrature.

        mu    <- mu    + nu/(sqrt(2pi)*sigma) * int_D (x - mu)   f dx
        sigma^2 <- sigma^2 + 1/(sqrt(2pi)*sigma) * int_D ((x-mu)^2 - sigma^2) f dx

    Returns the list of (mu, sigma) pairs including the start point.
    """
    mu, sigma = float(mu0), float(sigma0)
    components = find_region(spec, mu, sigma) if spec.region is not None else None
    path = [(mu, sigma)]
    for _ in range(steps):
        comps = components if components is not None else find_region(spec, mu, sigma)
        v = sigma * sigma
        inv2v = 1.0 / (2.0 * v)
        center = mu

        def f1(x):
            return (x - center) * np.exp(-((x - center) ** 2) * inv2v)

        def f2(x):
            return ((x - center) ** 2 - v) * np.exp(-((x - center) ** 2) * inv2v)

        norm = 1.0 / (_SQRT_2PI * sigma)
        d_mu = nu * norm * _region_integral(comps, f1, tol)
        d_var = norm * _region_integral(comps, f2, tol)
        mu = mu + d_mu
        sigma = float(np.sqrt(max(v + d_var, 1e-300)))
        path.append((mu, sigma))
    return path


# ---------------------------------------------------------------------------
# KL budget bounds
# ---------------------------------------------------------------------------

def direct_kl_closed_bound(d: int, alpha: float, eps: float) -> float:
    """Exact worst-case KL for the direct rule with std ratios in [1-eps, 1+eps].

    The mean part contributes at most alpha/(1-eps)^2 (offset norm clipped at
    sqrt(2 alpha), smallest denominator); each dimension's std part is
    maximized at ratio 1-eps.
    """
    if not (0.0 <= eps < 1.0):
        raise ValueError("eps must be in [0, 1)")
    s = 1.0 - eps
    per_dim_std = np.log(s) + (1.0 / (s * s) - 1.0) / 2.0 if eps > 0 else 0.0
    return alpha / (s * s) + d * float(per_dim_std)


def direct_kl_samples(d: int, alpha: float, eps: float, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """KL of n randomized direct-rule targets against the old distribution.

    Noise is standard normal, advantages are fair coin flips through the
    sign gate, and new/old std ratios are uniform on [1-eps, 1+eps].
    """
    y = rng.standard_normal((n, d))
    g = rng.choice([-1.0, 1.0], size=n)
    norms = np.linalg.norm(y, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    scale = np.where(norms == 0.0, 1.0, np.minimum(1.0, np.sqrt(2.0 * alpha) / safe))
    mu_rel = g[:, None] * scale[:, None] * y
    sigma_rel = rng.uniform(1.0 - eps, 1.0 + eps, size=(n, d))
    kl = 0.5 * np.sum(
        2.0 * np.log(sigma_rel) + (1.0 + mu_rel**2) / sigma_rel**2 - 1.0, axis=1
    )
    return kl


def es_expected_kl(d: int, nu: float, eps: float, n: int,
                   rng: np.random.Generator):
    """Monte Carlo E[KL] for the es rule in its worst gating case.

    All advantages positive (the bound's regime): mu_rel = nu*y per draw,
    std ratios uniform on [1-eps, 1+eps]. Returns (mean, std_error, bound)
    with bound = 0.5*d*nu^2*(1+2*eps).
    """
    y = rng.standard_normal((n, d))
    sigma_rel = rng.uniform(1.0 - eps, 1.0 + eps, size=(n, d))
    mu_rel = nu * y
    kl = 0.5 * np.sum(
        2.0 * np.log(sigma_rel) + (1.0 + mu_rel**2) / sigma_rel**2 - 1.0, axis=1
    )
    mean = float(np.mean(kl))
    se = float(np.std(kl, ddof=1) / np.sqrt(n))
    bound = 0.5 * d * nu * nu * (1.0 + 2.0 * eps)
    return mean, se, bound
