"""Compiled inner-product kernels with a fixed summation order.

All exact covariance values in the package go through :func:`dot`, so an
entry computed on the sparse path is bit-identical to the same entry of the
dense oracle. The order is: eight interleaved partial sums over the
8-aligned prefix, combined as a balanced tree, then the tail added
sequentially.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dot(x, y):
    n = x.shape[0]
    a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
    nb = n - n % 8
    for t in range(0, nb, 8):
        a0 += x[t] * y[t]
        a1 += x[t + 1] * y[t + 1]
        a2 += x[t + 2] * y[t + 2]
        a3 += x[t + 3] * y[t + 3]
        a4 += x[t + 4] * y[t + 4]
        a5 += x[t + 5] * y[t + 5]
        a6 += x[t + 6] * y[t + 6]
        a7 += x[t + 7] * y[t + 7]
    tail = 0.0
    for t in range(nb, n):
        tail += x[t] * y[t]
    return (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail


@njit(cache=True, nogil=True)
def pair_dots(cols, left, right, denom):
    out = np.empty(left.shape[0])
    for t in range(left.shape[0]):
        i = left[t]
        j = right[t]
        if j < i:
            i, j = j, i
        out[t] = dot(cols[i], cols[j]) / denom
    return out


@njit(cache=True, nogil=True)
def gram(cols, denom):
    p = cols.shape[0]
    out = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            v = dot(cols[i], cols[j]) / denom
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True, nogil=True)
def row_dots(cols, x, denom):
    p = cols.shape[0]
    out = np.empty(p)
    for j in range(p):
        out[j] = dot(x, cols[j]) / denom
    return out
