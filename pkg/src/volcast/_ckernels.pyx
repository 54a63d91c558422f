# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: GARCH recursions and the binned mutual-information count."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, floor, INFINITY

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


def garch_variance(const double[::1] r, double omega, double alpha, double beta,
                   double h2_init, bint contemporaneous=False):
    cdef Py_ssize_t n = r.shape[0], t
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] h2 = out
    cdef double a, b
    if n == 0:
        return out
    h2[0] = h2_init
    if contemporaneous:
        for t in range(1, n):
            a = omega + beta * h2[t - 1]
            b = alpha * h2[t - 1] * r[t] * r[t]
            h2[t] = 0.5 * (a + sqrt(a * a + 4.0 * b))
    else:
        for t in range(1, n):
            h2[t] = (omega + alpha * r[t - 1] * r[t - 1]) + beta * h2[t - 1]
    return out


def garch_loglik(const double[::1] r, double omega, double alpha, double beta,
                 double h2_init, bint contemporaneous=False):
    cdef Py_ssize_t n = r.shape[0], t
    cdef double h2 = h2_init, prev, a, b, total = 0.0
    if n == 0:
        return 0.0
    for t in range(n):
        if t > 0:
            prev = h2
            if contemporaneous:
                a = omega + beta * prev
                b = alpha * prev * r[t] * r[t]
                h2 = 0.5 * (a + sqrt(a * a + 4.0 * b))
            else:
                h2 = (omega + alpha * r[t - 1] * r[t - 1]) + beta * prev
        if not h2 > 0.0:
            return -INFINITY
        total += -0.5 * (LOG_2PI + log(h2) + r[t] * r[t] / h2)
    return total


def garch_simulate(const double[::1] z, double omega, double alpha, double beta,
                   double h2_0):
    cdef Py_ssize_t n = z.shape[0], t
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] h2_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] r = r_arr
    cdef double[::1] h2 = h2_arr
    cdef double cur = h2_0
    for t in range(n):
        h2[t] = cur
        r[t] = sqrt(cur) * z[t]
        cur = (omega + alpha * r[t] * r[t]) + beta * cur
    return r_arr, h2_arr


cdef inline Py_ssize_t _bin(double v, double lo, double hi, Py_ssize_t n_bins) nogil:
    cdef Py_ssize_t i
    if hi == lo:
        return 0
    i = <Py_ssize_t>floor(n_bins * (v - lo) / (hi - lo))
    if i >= n_bins:
        i = n_bins - 1
    return i


def binned_mi(const double[::1] x, const double[::1] y, Py_ssize_t n_bins):
    cdef Py_ssize_t n = x.shape[0], t, i, j
    cdef double xlo = x[0], xhi = x[0], ylo = y[0], yhi = y[0]
    cdef double total = 0.0, p, tn = <double>n
    cdef cnp.ndarray[cnp.int64_t, ndim=2] joint_arr = np.zeros((n_bins, n_bins), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] mx_arr = np.zeros(n_bins, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] my_arr = np.zeros(n_bins, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] joint = joint_arr
    cdef cnp.int64_t[::1] mx = mx_arr
    cdef cnp.int64_t[::1] my = my_arr
    for t in range(1, n):
        if x[t] < xlo:
            xlo = x[t]
        if x[t] > xhi:
            xhi = x[t]
        if y[t] < ylo:
            ylo = y[t]
        if y[t] > yhi:
            yhi = y[t]
    for t in range(n):
        i = _bin(x[t], xlo, xhi, n_bins)
        j = _bin(y[t], ylo, yhi, n_bins)
        joint[i, j] += 1
        mx[i] += 1
        my[j] += 1
    for i in range(n_bins):
        if mx[i] == 0:
            continue
        for j in range(n_bins):
            if joint[i, j] == 0:
                continue
            p = joint[i, j] / tn
            total += p * log(joint[i, j] * tn / (<double>mx[i] * <double>my[j]))
    return total
