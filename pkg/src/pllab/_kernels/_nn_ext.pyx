# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels; same contracts as ``nn_py``.

Inner loops run over flat row-major pointers and avoid data-dependent
branches (ELU and its derivative pick a side with arithmetic masks), which
keeps them vectorizable and free of mispredictions on mixed-sign inputs.
"""

import numpy as np

from libc.math cimport sqrt


cdef int _elu_finish(double* h, const double* em1, Py_ssize_t n, double alpha) nogil:
    # h holds the batch-norm output y, em1 holds expm1(min(y, 0));
    # elu(y) = max(y, 0) + alpha * expm1(min(y, 0)) with one side exactly 0
    cdef Py_ssize_t k
    cdef double y
    cdef int ok = 1
    for k in range(n):
        y = h[k]
        ok &= (y - y == 0.0)  # false for inf and nan
        h[k] = (y if y > 0.0 else 0.0) + alpha * em1[k]
    return ok


def bn_elu_train(z, scale, shift, double eps, double alpha, h_out, xhat_out,
                 mean_out, var_out, inv_std_out, scratch):
    cdef const double[:, ::1] zv = z
    cdef const double[::1] scv = scale
    cdef const double[::1] shv = shift
    cdef double[:, ::1] hv = h_out
    cdef double[:, ::1] xv = xhat_out
    cdef double[:, ::1] nv = scratch
    cdef double[::1] meanv = mean_out
    cdef double[::1] varv = var_out
    cdef double[::1] isv = inv_std_out
    cdef Py_ssize_t B = zv.shape[0], H = zv.shape[1], i, j
    cdef const double* zp = &zv[0, 0]
    cdef const double* sc = &scv[0]
    cdef const double* sh = &shv[0]
    cdef double* h = &hv[0, 0]
    cdef double* xh = &xv[0, 0]
    cdef double* neg = &nv[0, 0]
    cdef double* mean = &meanv[0]
    cdef double* var = &varv[0]
    cdef double* inv_std = &isv[0]
    cdef const double* zr
    cdef double* xr
    cdef double* hr
    cdef double* nr
    cdef double x, y, inv_b = 1.0 / B
    cdef int finite
    with nogil:
        for j in range(H):
            mean[j] = 0.0
            var[j] = 0.0
        for i in range(B):
            zr = zp + i * H
            for j in range(H):
                mean[j] += zr[j]
        for j in range(H):
            mean[j] *= inv_b
        for i in range(B):
            zr = zp + i * H
            xr = xh + i * H
            for j in range(H):
                x = zr[j] - mean[j]
                xr[j] = x
                var[j] += x * x
        for j in range(H):
            var[j] *= inv_b
            inv_std[j] = 1.0 / sqrt(var[j] + eps)
        for i in range(B):
            xr = xh + i * H
            hr = h + i * H
            nr = neg + i * H
            for j in range(H):
                x = xr[j] * inv_std[j]
                xr[j] = x
                y = x * sc[j] + sh[j]
                hr[j] = y
                nr[j] = y if y < 0.0 else 0.0
    np.expm1(scratch, out=scratch)
    with nogil:
        finite = _elu_finish(h, neg, B * H, alpha)
    return bool(finite)


def bn_elu_eval(z, scale, shift, running_mean, running_var, double eps, double alpha, h_out,
                scratch):
    cdef const double[:, ::1] zv = z
    cdef const double[::1] sc = scale
    cdef const double[::1] shv = shift
    cdef const double[::1] rmv = running_mean
    cdef const double[::1] rv = running_var
    cdef double[:, ::1] hv = h_out
    cdef double[:, ::1] nv = scratch
    cdef Py_ssize_t B = zv.shape[0], H = zv.shape[1], i, j
    cdef const double* zp = &zv[0, 0]
    cdef const double* sh = &shv[0]
    cdef const double* rm = &rmv[0]
    cdef double* h = &hv[0, 0]
    cdef double* neg = &nv[0, 0]
    cdef const double* zr
    cdef double* hr
    cdef double* nr
    cdef double y
    cdef int finite
    gain_arr = np.empty(H)
    cdef double[::1] gv = gain_arr
    cdef double* gain = &gv[0]
    with nogil:
        for j in range(H):
            gain[j] = sc[j] / sqrt(rv[j] + eps)
        for i in range(B):
            zr = zp + i * H
            hr = h + i * H
            nr = neg + i * H
            for j in range(H):
                y = (zr[j] - rm[j]) * gain[j] + sh[j]
                hr[j] = y
                nr[j] = y if y < 0.0 else 0.0
    np.expm1(scratch, out=scratch)
    with nogil:
        finite = _elu_finish(h, neg, B * H, alpha)
    return bool(finite)


def bn_elu_backward(const double[:, ::1] dh, const double[:, ::1] h, const double[:, ::1] xhat,
                    const double[::1] scale, const double[::1] inv_std, double alpha,
                    double[:, ::1] dz_out, double[::1] dscale_out, double[::1] dshift_out):
    cdef Py_ssize_t B = dh.shape[0], H = dh.shape[1], i, j
    cdef const double* dhp = &dh[0, 0]
    cdef const double* hp = &h[0, 0]
    cdef const double* xp = &xhat[0, 0]
    cdef double* dz = &dz_out[0, 0]
    cdef double* dscale = &dscale_out[0]
    cdef double* dshift = &dshift_out[0]
    cdef const double* dhr
    cdef const double* hr
    cdef const double* xr
    cdef double* dzr
    cdef double dy, hv, pos
    coef_arr = np.empty(H)
    cdef double[::1] cv = coef_arr
    cdef double* coef = &cv[0]
    cdef double fb = <double> B
    with nogil:
        for j in range(H):
            dscale[j] = 0.0
            dshift[j] = 0.0
        for i in range(B):
            dhr = dhp + i * H
            hr = hp + i * H
            xr = xp + i * H
            dzr = dz + i * H
            for j in range(H):
                # elu'(y) from the output: 1 if h > 0 else h + alpha
                hv = hr[j]
                pos = <double> (hv > 0.0)
                dy = dhr[j] * (pos + (1.0 - pos) * (hv + alpha))
                dzr[j] = dy
                dshift[j] += dy
                dscale[j] += dy * xr[j]
        for j in range(H):
            coef[j] = scale[j] * inv_std[j] / fb
        for i in range(B):
            xr = xp + i * H
            dzr = dz + i * H
            for j in range(H):
                dzr[j] = coef[j] * (fb * dzr[j] - dshift[j] - xr[j] * dscale[j])


def all_finite(const double[::1] a):
    cdef Py_ssize_t k, n = a.shape[0]
    cdef int ok = 1
    cdef double x
    if n == 0:
        return True
    cdef const double* p = &a[0]
    with nogil:
        for k in range(n):
            x = p[k]
            ok &= (x - x == 0.0)
    return bool(ok)


def yogi_update(double[::1] pv, const double[::1] gv, double[::1] mv, double[::1] vv,
                double lr, double beta1, double beta2, double c1, double c2, double eps):
    cdef Py_ssize_t k, n = pv.shape[0]
    if n == 0:
        return
    cdef double* p = &pv[0]
    cdef const double* g = &gv[0]
    cdef double* m = &mv[0]
    cdef double* v = &vv[0]
    cdef double gi, g2, d, mi, vi, sgn
    cdef double step = lr / c1, rc2 = 1.0 / sqrt(c2), one_b1 = 1.0 - beta1, one_b2 = 1.0 - beta2
    with nogil:
        for k in range(n):
            gi = g[k]
            g2 = gi * gi
            mi = beta1 * m[k] + one_b1 * gi
            m[k] = mi
            vi = v[k]
            d = vi - g2
            sgn = <double> (d > 0.0) - <double> (d < 0.0)
            vi = vi - one_b2 * sgn * g2
            v[k] = vi
            p[k] -= step * mi / (sqrt(vi) * rc2 + eps)
