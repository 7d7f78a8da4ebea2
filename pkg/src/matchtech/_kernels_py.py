"""numpy implementations of the compiled kernels, used when the extension is absent."""
from __future__ import annotations

import numpy as np


def _directions(feature, threshold, row):
    internal = feature >= 0
    f_safe = np.where(internal, feature, 0)
    return np.where(internal, row[f_safe] <= threshold, False)


def zeta_transform(a: np.ndarray, n_bits: int) -> np.ndarray:
    """In place: ``a[S] <- sum over U subset of S of a[U]``."""
    for k in range(n_bits):
        view = a.reshape(-1, 2, 1 << k)
        view[:, 1, :] += view[:, 0, :]
    return a


def tree_coalition_values(feature, threshold, left, right, value, roots, weights, bias,
                          x, background, bitpos, n_bits):
    acc = np.zeros(1 << n_bits)
    xl = _directions(feature, threshold, x)
    for row in background:
        bl = _directions(feature, threshold, row)
        for root, w in zip(roots.tolist(), weights.tolist()):
            stack = [(root, 0, 0)]
            while stack:
                node, req_in, req_out = stack.pop()
                f = feature[node]
                if f < 0:
                    c = w * value[node]
                    sub = req_out
                    while True:
                        acc[req_in | sub] += -c if bin(sub).count("1") & 1 else c
                        if sub == 0:
                            break
                        sub = (sub - 1) & req_out
                    continue
                bit = bitpos[f]
                if xl[node] == bl[node] or bit < 0:
                    stack.append((left[node] if bl[node] else right[node], req_in, req_out))
                    continue
                bit = 1 << int(bit)
                if not req_out & bit:
                    stack.append((left[node] if xl[node] else right[node], req_in | bit, req_out))
                if not req_in & bit:
                    stack.append((left[node] if bl[node] else right[node], req_in, req_out | bit))
    zeta_transform(acc, n_bits)
    return bias + acc / len(background)


def tree_coalition_values_direct(feature, threshold, left, right, value, roots, weights, bias,
                                 x, background, bitpos, n_bits):
    n_masks = 1 << n_bits
    masks = np.arange(n_masks, dtype=np.int64)
    internal = feature >= 0
    f_safe = np.where(internal, feature, 0)
    xl = _directions(feature, threshold, x)
    bit_of_node = np.where(internal, bitpos[f_safe], -1)
    out = np.zeros(n_masks)
    for row in background:
        bl = _directions(feature, threshold, row)
        for root, w in zip(roots, weights):
            node = np.full(n_masks, root, dtype=np.int64)
            while True:
                active = internal[node]
                if not active.any():
                    break
                bit = bit_of_node[node]
                from_x = (bit >= 0) & ((masks >> np.maximum(bit, 0)) & 1).astype(bool)
                go_left = np.where(from_x, xl[node], bl[node])
                node = np.where(active, np.where(go_left, left[node], right[node]), node)
            out += w * value[node]
    return bias + out / len(background)


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros(len(masks), dtype=np.int64)
    m = masks.copy()
    while m.any():
        counts += m & 1
        m >>= 1
    return counts


def shapley_from_coalitions(v, p):
    v = np.asarray(v, dtype=float)
    masks = np.arange(1 << p, dtype=np.int64)
    size = _popcount(masks)
    coef = np.empty(p)
    c = 1.0 / p
    for k in range(p):
        coef[k] = c
        if k + 1 < p:
            c = c * (k + 1) / (p - k - 1)
    phi = np.zeros(p)
    for j in range(p):
        without = masks[(masks >> j) & 1 == 0]
        phi[j] = np.sum(coef[size[without]] * (v[without | (1 << j)] - v[without]))
    return phi
