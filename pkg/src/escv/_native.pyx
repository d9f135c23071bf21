# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout kernels: per-step MLP forward and log-density backprop.

These two loops dominate training runtime; everything else in the package
stays in numpy. A pure-numpy fallback with identical signatures lives in
_native_py.py.
"""

import numpy as np


def mlp2_forward(double[::1] x, double[:, ::1] w1, double[::1] b1,
                 double[:, ::1] w2, double[::1] b2,
                 double[:, ::1] w3, double[::1] b3,
                 double[::1] h1, double[::1] h2, double[::1] mean):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n1 = h1.shape[0]
    cdef Py_ssize_t n2 = h2.shape[0]
    cdef Py_ssize_t k = mean.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n1):
        acc = b1[i]
        for j in range(n_in):
            acc += w1[i, j] * x[j]
        h1[i] = acc if acc > 0.0 else 0.0
    for i in range(n2):
        acc = b2[i]
        for j in range(n1):
            acc += w2[i, j] * h1[j]
        h2[i] = acc if acc > 0.0 else 0.0
    for i in range(k):
        acc = b3[i]
        for j in range(n2):
            acc += w3[i, j] * h2[j]
        mean[i] = acc


def mlp2_backward(double[::1] x, double[::1] h1, double[::1] h2,
                  double[:, ::1] w2, double[:, ::1] w3,
                  double[::1] delta, double[::1] grad):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n1 = h1.shape[0]
    cdef Py_ssize_t n2 = h2.shape[0]
    cdef Py_ssize_t k = delta.shape[0]
    cdef Py_ssize_t i, j, o
    cdef double acc, g
    dz2_arr = np.empty(n2)
    dz1_arr = np.empty(n1)
    cdef double[::1] dz2 = dz2_arr
    cdef double[::1] dz1 = dz1_arr
    for i in range(n2):
        if h2[i] > 0.0:
            acc = 0.0
            for j in range(k):
                acc += w3[j, i] * delta[j]
            dz2[i] = acc
        else:
            dz2[i] = 0.0
    for i in range(n1):
        if h1[i] > 0.0:
            acc = 0.0
            for j in range(n2):
                acc += w2[j, i] * dz2[j]
            dz1[i] = acc
        else:
            dz1[i] = 0.0
    o = 0
    for i in range(n1):
        g = dz1[i]
        for j in range(n_in):
            grad[o] = g * x[j]
            o += 1
    for i in range(n1):
        grad[o] = dz1[i]
        o += 1
    for i in range(n2):
        g = dz2[i]
        for j in range(n1):
            grad[o] = g * h1[j]
            o += 1
    for i in range(n2):
        grad[o] = dz2[i]
        o += 1
    for i in range(k):
        g = delta[i]
        for j in range(n2):
            grad[o] = g * h2[j]
            o += 1
    for i in range(k):
        grad[o] = delta[i]
        o += 1
