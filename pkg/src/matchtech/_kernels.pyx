# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coalition-value and Shapley kernels.

For a hybrid row that takes features in ``S`` from the instance ``x`` and
the rest from a background row ``b``, a tree node on feature ``f`` sends
both rows the same way unless ``x`` and ``b`` disagree there; then the
``x`` branch requires ``f`` in ``S`` and the ``b`` branch requires ``f``
outside ``S``. Each reachable leaf therefore contributes its value on the
sub-cube ``{S : R <= S, S & Q = 0}``. Writing that indicator as
``sum_{T <= Q} (-1)^|T| [R | T <= S]`` turns every leaf into a few point
masses, and a single subset-sum transform recovers ``v(S)`` for all masks.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t

cnp.import_array()


cdef inline int popcount64(int64_t m) nogil:
    cdef int c = 0
    while m:
        m &= m - 1
        c += 1
    return c


def tree_coalition_values(const int64_t[:] feature, const double[:] threshold,
                          const int64_t[:] left, const int64_t[:] right,
                          const double[:] value, const int64_t[:] roots,
                          const double[:] weights, double bias,
                          const double[:] x, const double[:, :] background,
                          const int64_t[:] bitpos, int n_bits):
    """v[S] = bias + mean_b sum_t w_t tree_t(hybrid(x, b, S)) for every mask S over ``n_bits``.

    Bit ``bitpos[f]`` of the mask selects whether feature ``f`` comes from
    ``x``; features with ``bitpos[f] < 0`` always come from the background row.
    """
    cdef Py_ssize_t n_nodes = feature.shape[0]
    cdef Py_ssize_t n_trees = roots.shape[0]
    cdef Py_ssize_t nb = background.shape[0]
    cdef int64_t n_masks = (<int64_t>1) << n_bits
    cdef cnp.ndarray[double, ndim=1] acc_arr = np.zeros(n_masks)
    cdef double[:] acc = acc_arr
    cdef cnp.ndarray[uint8_t, ndim=1] xl_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.ndarray[uint8_t, ndim=1] bl_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef uint8_t[:] xl = xl_arr
    cdef uint8_t[:] bl = bl_arr
    # explicit traversal stack of (node, in-mask, out-mask)
    cdef cnp.ndarray[int64_t, ndim=2] stack_arr = np.zeros((2 * n_nodes + 2, 3), dtype=np.int64)
    cdef int64_t[:, :] stack = stack_arr
    cdef Py_ssize_t b, t, i, top
    cdef int64_t node, f, bit, req_in, req_out, sub, s, half, block, lo
    cdef double c
    cdef int k

    for i in range(n_nodes):
        f = feature[i]
        if f >= 0:
            xl[i] = x[f] <= threshold[i]
    for b in range(nb):
        for i in range(n_nodes):
            f = feature[i]
            if f >= 0:
                bl[i] = background[b, f] <= threshold[i]
        for t in range(n_trees):
            top = 0
            stack[0, 0] = roots[t]
            stack[0, 1] = 0
            stack[0, 2] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack[top, 0]
                req_in = stack[top, 1]
                req_out = stack[top, 2]
                f = feature[node]
                if f < 0:
                    c = weights[t] * value[node]
                    # sum over subsets T of req_out of (-1)^|T| at req_in | T
                    sub = req_out
                    while True:
                        if popcount64(sub) & 1:
                            acc[req_in | sub] -= c
                        else:
                            acc[req_in | sub] += c
                        if sub == 0:
                            break
                        sub = (sub - 1) & req_out
                    continue
                bit = bitpos[f]
                if xl[node] == bl[node] or bit < 0:
                    stack[top, 0] = left[node] if bl[node] else right[node]
                    stack[top, 1] = req_in
                    stack[top, 2] = req_out
                    top += 1
                    continue
                bit = (<int64_t>1) << bit
                # instance branch: feature in S
                if not (req_out & bit):
                    stack[top, 0] = left[node] if xl[node] else right[node]
                    stack[top, 1] = req_in | bit
                    stack[top, 2] = req_out
                    top += 1
                # background branch: feature outside S
                if not (req_in & bit):
                    stack[top, 0] = left[node] if bl[node] else right[node]
                    stack[top, 1] = req_in
                    stack[top, 2] = req_out | bit
                    top += 1
    # subset-sum (zeta) transform
    for k in range(n_bits):
        half = (<int64_t>1) << k
        block = half << 1
        lo = 0
        while lo < n_masks:
            for s in range(lo + half, lo + block):
                acc[s] += acc[s - half]
            lo += block
    for s in range(n_masks):
        acc[s] = bias + acc[s] / nb
    return acc_arr


def tree_coalition_values_direct(const int64_t[:] feature, const double[:] threshold,
                                 const int64_t[:] left, const int64_t[:] right,
                                 const double[:] value, const int64_t[:] roots,
                                 const double[:] weights, double bias,
                                 const double[:] x, const double[:, :] background,
                                 const int64_t[:] bitpos, int n_bits):
    """Same result as :func:`tree_coalition_values` by walking every tree for every mask."""
    cdef Py_ssize_t n_nodes = feature.shape[0]
    cdef Py_ssize_t n_trees = roots.shape[0]
    cdef Py_ssize_t nb = background.shape[0]
    cdef int64_t n_masks = (<int64_t>1) << n_bits
    cdef cnp.ndarray[double, ndim=1] out_arr = np.zeros(n_masks)
    cdef double[:] out = out_arr
    cdef cnp.ndarray[uint8_t, ndim=1] xl_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.ndarray[uint8_t, ndim=1] bl_arr = np.zeros(n_nodes, dtype=np.uint8)
    cdef uint8_t[:] xl = xl_arr
    cdef uint8_t[:] bl = bl_arr
    cdef Py_ssize_t b, t, i
    cdef int64_t s, node, f, bit
    cdef double acc
    cdef int go_left

    for i in range(n_nodes):
        f = feature[i]
        if f >= 0:
            xl[i] = x[f] <= threshold[i]
    for b in range(nb):
        for i in range(n_nodes):
            f = feature[i]
            if f >= 0:
                bl[i] = background[b, f] <= threshold[i]
        for s in range(n_masks):
            acc = 0.0
            for t in range(n_trees):
                node = roots[t]
                while feature[node] >= 0:
                    if xl[node] == bl[node]:
                        go_left = xl[node]
                    else:
                        bit = bitpos[feature[node]]
                        if bit >= 0 and (s >> bit) & 1:
                            go_left = xl[node]
                        else:
                            go_left = bl[node]
                    node = left[node] if go_left else right[node]
                acc += weights[t] * value[node]
            out[s] += acc
    for s in range(n_masks):
        out[s] = bias + out[s] / nb
    return out_arr


def shapley_from_coalitions(const double[:] v, int p):
    """phi_j = sum over S without j of |S|!(p-|S|-1)!/p! (v(S+j) - v(S))."""
    cdef int64_t n_masks = (<int64_t>1) << p
    cdef cnp.ndarray[double, ndim=1] coef_arr = np.zeros(p)
    cdef double[:] coef = coef_arr
    cdef cnp.ndarray[double, ndim=1] phi_arr = np.zeros(p)
    cdef double[:] phi = phi_arr
    cdef int k, j, size
    cdef int64_t s
    cdef double c = 1.0 / p
    # weight for |S| = k: k!(p-k-1)!/p!, built by the ratio w_{k+1}/w_k = (k+1)/(p-k-1)
    for k in range(p):
        coef[k] = c
        if k + 1 < p:
            c = c * (k + 1) / (p - k - 1)
    for s in range(n_masks):
        size = popcount64(s)
        for j in range(p):
            if not (s >> j) & 1:
                phi[j] += coef[size] * (v[s | ((<int64_t>1) << j)] - v[s])
    return phi_arr
