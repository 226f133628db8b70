# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled MLP kernels.

Same contract as _kernels_py (tanh hidden layers, linear output, float64):
BLAS dgemm for the matrix products. Elementwise work (bias add, tanh, the
tanh-derivative scaling) runs as scalar loops for small arrays, where it
beats numpy's dispatch overhead, and through numpy ufuncs for large ones,
where scalar libm tanh would dominate the runtime. All row-major arrays are
fed to Fortran dgemm through the transpose identity C = A@B <=> C^T = B^T
A^T, with the row-major buffers reinterpreted as their column-major
transposes.
"""

import numpy as np

from libc.math cimport tanh
from scipy.linalg.cython_blas cimport dgemm

# below this many elements the scalar loop wins over a numpy ufunc call
DEF SMALL = 2048


cdef inline void _dgemm(char ta, char tb, int m, int n, int k,
                        double* a, int lda, double* b, int ldb,
                        double* c, int ldc) noexcept nogil:
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


def forward(x, weights, biases):
    """See _kernels_py.forward; identical semantics."""
    cdef int nlayers = len(weights)
    h_arr = np.ascontiguousarray(x, dtype=np.float64)
    cache = [h_arr]
    out = None
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] w
    cdef double[::1] bias
    cdef double[:, ::1] z
    cdef int i, r, c, rows, nin, nout
    cdef bint hidden
    for i in range(nlayers):
        w = weights[i]
        bias = biases[i]
        rows = h.shape[0]
        nin = w.shape[0]
        nout = w.shape[1]
        hidden = i < nlayers - 1
        z_arr = np.empty((rows, nout), dtype=np.float64)
        z = z_arr
        # col-major view: z^T (nout x rows) = w^T-view @ h^T-view
        with nogil:
            _dgemm(b'N', b'N', nout, rows, nin,
                   &w[0, 0], nout, &h[0, 0], nin, &z[0, 0], nout)
        if rows * nout <= SMALL:
            with nogil:
                if hidden:
                    for r in range(rows):
                        for c in range(nout):
                            z[r, c] = tanh(z[r, c] + bias[c])
                else:
                    for r in range(rows):
                        for c in range(nout):
                            z[r, c] += bias[c]
        else:
            z_arr += biases[i]
            if hidden:
                np.tanh(z_arr, out=z_arr)
        if hidden:
            h = z
            cache.append(z_arr)
        else:
            out = z_arr
    return out, cache


def backward(delta, weights, cache):
    """See _kernels_py.backward; identical semantics."""
    cdef int nlayers = len(weights)
    d_arr = np.ascontiguousarray(delta, dtype=np.float64)
    gws = [None] * nlayers
    gbs = [None] * nlayers
    cdef double[:, ::1] d = d_arr
    cdef double[:, ::1] w
    cdef double[:, ::1] xv
    cdef double[:, ::1] gw
    cdef double[::1] gb
    cdef double[:, ::1] dprev
    cdef int i, r, c, rows, nin, nout
    for i in range(nlayers - 1, -1, -1):
        w = weights[i]
        xv = cache[i]
        rows = d.shape[0]
        nin = w.shape[0]
        nout = w.shape[1]
        gw_arr = np.empty((nin, nout), dtype=np.float64)
        gw = gw_arr
        with nogil:
            # gw = x^T @ d, col-major: gw^T (nout x nin) = d^T-view @ op(x)='T'
            _dgemm(b'N', b'T', nout, nin, rows,
                   &d[0, 0], nout, &xv[0, 0], nin, &gw[0, 0], nout)
        if rows * nout <= SMALL:
            gb_arr = np.zeros(nout, dtype=np.float64)
            gb = gb_arr
            with nogil:
                for r in range(rows):
                    for c in range(nout):
                        gb[c] += d[r, c]
        else:
            gb_arr = d_arr.sum(axis=0)
        gws[i] = gw_arr
        gbs[i] = gb_arr
        if i > 0:
            dp_arr = np.empty((rows, nin), dtype=np.float64)
            dprev = dp_arr
            with nogil:
                # dprev = d @ w^T, col-major: dprev^T (nin x rows) = op(w)='T' @ d^T-view
                _dgemm(b'T', b'N', nin, rows, nout,
                       &w[0, 0], nout, &d[0, 0], nout, &dprev[0, 0], nin)
            if rows * nin <= SMALL:
                with nogil:
                    for r in range(rows):
                        for c in range(nin):
                            dprev[r, c] *= 1.0 - xv[r, c] * xv[r, c]
            else:
                np.multiply(dp_arr, 1.0 - np.asarray(cache[i]) ** 2, out=dp_arr)
            d = dprev
            d_arr = dp_arr
    return gws, gbs
