# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled subspace-pursuit hot loop.

Same functions and semantics as ``_pykernels``. The LS solves go through a
hand-written complex Cholesky of the (at most 2s x 2s) Gram matrix, which for
the tiny systems in play is much cheaper than a LAPACK round trip.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef double complex cplx
ctypedef cnp.int64_t idx_t

BACKEND = "cython"


cdef inline double abs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline cplx cmul_conj(cplx a, cplx b) noexcept nogil:
    # conj(a) * b
    cdef cplx r
    r.real = a.real * b.real + a.imag * b.imag
    r.imag = a.real * b.imag - a.imag * b.real
    return r


cdef void _block_energies(const cplx[:, :] B, const cplx[:, :] R, double[:] out) noexcept nogil:
    cdef Py_ssize_t K = B.shape[0], Q = B.shape[1], T = R.shape[1]
    cdef Py_ssize_t q, t, k
    cdef cplx acc
    cdef double e
    for q in range(Q):
        e = 0.0
        for t in range(T):
            acc = 0
            for k in range(K):
                acc = acc + cmul_conj(B[k, q], R[k, t])
            e += abs2(acc)
        out[q] = e


cdef Py_ssize_t _find_top(const double[:] v, Py_ssize_t count, idx_t[:] out, cnp.int8_t[:] used) noexcept nogil:
    cdef Py_ssize_t n = v.shape[0], i, j, c, best
    cdef idx_t tmp
    if count > n:
        count = n
    for i in range(n):
        used[i] = 0
    for c in range(count):
        best = -1
        for i in range(n):
            if not used[i] and (best < 0 or v[i] > v[best]):
                best = i
        used[best] = 1
        out[c] = best
    # ascending order
    for i in range(1, count):
        tmp = out[i]
        j = i - 1
        while j >= 0 and out[j] > tmp:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = tmp
    return count


cdef int _solve(const cplx[:, :] B, const cplx[:, :] Y, const idx_t[:] sup, Py_ssize_t m,
                cplx[:, :] L, cplx[:, :] X, double tol) noexcept nogil:
    """LS of Y on columns ``sup[:m]`` of B; solution written to X[:m]. 0 on success."""
    cdef Py_ssize_t K = B.shape[0], T = Y.shape[1]
    cdef Py_ssize_t i, j, k, t
    cdef cplx acc
    cdef double d, dmax = 0.0, dmin = 0.0
    if m == 0:
        return 0
    # Gram (lower triangle) and right-hand side
    for i in range(m):
        for j in range(i + 1):
            acc = 0
            for k in range(K):
                acc = acc + cmul_conj(B[k, sup[i]], B[k, sup[j]])
            L[i, j] = acc
        for t in range(T):
            acc = 0
            for k in range(K):
                acc = acc + cmul_conj(B[k, sup[i]], Y[k, t])
            X[i, t] = acc
    # in-place Cholesky; L[i, j] currently holds conj(G[j, i]) = G[i, j]
    for j in range(m):
        d = L[j, j].real
        for k in range(j):
            d -= abs2(L[j, k])
        if not d > 0.0:
            return 1
        if j == 0 or d > dmax:
            dmax = d
        if j == 0 or d < dmin:
            dmin = d
        d = sqrt(d)
        L[j, j] = d
        for i in range(j + 1, m):
            acc = L[i, j]
            for k in range(j):
                acc = acc - L[i, k] * L[j, k].conjugate()
            L[i, j] = acc / d
    if dmin < tol * dmax:
        return 1
    # forward then backward substitution, column by column
    for t in range(T):
        for i in range(m):
            acc = X[i, t]
            for k in range(i):
                acc = acc - L[i, k] * X[k, t]
            X[i, t] = acc / L[i, i].real
        for i in range(m - 1, -1, -1):
            acc = X[i, t]
            for k in range(i + 1, m):
                acc = acc - L[k, i].conjugate() * X[k, t]
            X[i, t] = acc / L[i, i].real
    return 0


def block_energies(B, R):
    cdef const cplx[:, :] Bv = np.ascontiguousarray(B, dtype=complex)
    cdef const cplx[:, :] Rv = np.ascontiguousarray(R, dtype=complex)
    out = np.empty(Bv.shape[1])
    _block_energies(Bv, Rv, out)
    return out


def find_top(values, Py_ssize_t count):
    cdef const double[:] v = np.ascontiguousarray(values, dtype=float)
    if count > v.shape[0]:
        count = v.shape[0]
    out = np.empty(count, dtype=np.int64)
    cdef cnp.int8_t[:] used = np.empty(v.shape[0], dtype=np.int8)
    _find_top(v, count, out, used)
    return out


def solve_support(B, Y, support, double rank_tol):
    cdef const cplx[:, :] Bv = np.ascontiguousarray(B, dtype=complex)
    cdef const cplx[:, :] Yv = np.ascontiguousarray(Y, dtype=complex)
    cdef const idx_t[:] sv = np.ascontiguousarray(support, dtype=np.int64)
    cdef Py_ssize_t m = sv.shape[0]
    L = np.zeros((max(m, 1), max(m, 1)), dtype=complex)
    X = np.zeros((m, Yv.shape[1]), dtype=complex)
    if _solve(Bv, Yv, sv, m, L, X, rank_tol):
        return None
    return X


def asp(B, Y, gamma_init, R_init, X_init, Py_ssize_t s, Py_ssize_t max_iter, double rank_tol):
    cdef const cplx[:, :] Bv = np.ascontiguousarray(B, dtype=complex)
    cdef const cplx[:, :] Yv = np.ascontiguousarray(Y, dtype=complex)
    cdef Py_ssize_t K = Bv.shape[0], Q = Bv.shape[1], T = Yv.shape[1]
    cdef Py_ssize_t i, j, k, t, q, m, n_top, n_gamma, n_new, it = 0, accepted = 0
    cdef bint failed = False
    cdef double e, e_prev
    cdef cplx acc

    gamma_arr = np.zeros(Q, dtype=np.int64)
    g0 = np.asarray(gamma_init, dtype=np.int64)
    n_gamma = g0.shape[0]
    gamma_arr[:n_gamma] = g0
    R_arr = np.array(R_init, dtype=complex, order="C", copy=True)
    X_best = np.asarray(X_init, dtype=complex)

    cdef idx_t[:] gamma = gamma_arr
    cdef cplx[:, :] R = R_arr
    lam_arr = np.empty(Q, dtype=np.int64)
    top_arr = np.empty(Q, dtype=np.int64)
    new_arr = np.empty(Q, dtype=np.int64)
    cdef idx_t[:] lam = lam_arr
    cdef idx_t[:] top = top_arr
    cdef idx_t[:] newg = new_arr
    cdef cnp.int8_t[:] used = np.empty(Q, dtype=np.int8)
    corr_arr = np.empty(Q)
    cdef double[:] corr = corr_arr
    L_arr = np.zeros((Q, Q), dtype=complex)
    W_arr = np.zeros((Q, T), dtype=complex)
    Xs_arr = np.zeros((Q, T), dtype=complex)
    Rn_arr = np.zeros((K, T), dtype=complex)
    Xb_arr = np.zeros((Q, T), dtype=complex)
    cdef cplx[:, :] Xb = Xb_arr
    cdef cplx[:, :] Lm = L_arr
    cdef cplx[:, :] W = W_arr
    cdef cplx[:, :] Xs = Xs_arr
    cdef cplx[:, :] Rn = Rn_arr

    e_prev = 0.0
    for k in range(K):
        for t in range(T):
            e_prev += abs2(R[k, t])

    with nogil:
        while it < max_iter:
            it += 1
            # support expansion: union of current support and top-s correlations
            _block_energies(Bv, R, corr)
            n_top = _find_top(corr, s, top, used)
            for q in range(Q):
                used[q] = 0
            for i in range(n_gamma):
                used[gamma[i]] = 1
            for i in range(n_top):
                used[top[i]] = 1
            m = 0
            for q in range(Q):
                if used[q]:
                    lam[m] = q
                    m += 1
            if _solve(Bv, Yv, lam, m, Lm, W, rank_tol):
                failed = accepted == 0
                break
            # pruning by block energy over the whole cluster
            for q in range(Q):
                corr[q] = 0.0
            for i in range(m):
                e = 0.0
                for t in range(T):
                    e += abs2(W[i, t])
                corr[lam[i]] = e
            n_new = _find_top(corr, s, newg, used)
            if _solve(Bv, Yv, newg, n_new, Lm, Xs, rank_tol):
                failed = accepted == 0
                break
            e = 0.0
            for k in range(K):
                for t in range(T):
                    acc = Yv[k, t]
                    for i in range(n_new):
                        acc = acc - Bv[k, newg[i]] * Xs[i, t]
                    Rn[k, t] = acc
                    e += abs2(acc)
            if e >= e_prev:
                break
            for k in range(K):
                for t in range(T):
                    R[k, t] = Rn[k, t]
            for i in range(n_new):
                gamma[i] = newg[i]
            n_gamma = n_new
            e_prev = e
            accepted += 1
            for q in range(Q):
                for t in range(T):
                    Xb[q, t] = 0
            for i in range(n_new):
                for t in range(T):
                    Xb[newg[i], t] = Xs[i, t]

    if accepted:
        X_best = Xb_arr
    return X_best, gamma_arr[:n_gamma].copy(), R_arr, it, bool(failed)
