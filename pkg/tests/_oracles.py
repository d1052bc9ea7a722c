"""Slow, obviously-correct reference implementations used by the tests."""

import itertools
import math

import numpy as np


def central_difference(loss_fn, tensors, h=1e-5):
    """Numerical gradient of ``loss_fn()`` w.r.t. every entry of every array in ``tensors``."""
    grads = {}
    for name, arr in tensors.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            plus = loss_fn()
            arr[idx] = old - h
            minus = loss_fn()
            arr[idx] = old
            g[idx] = (plus - minus) / (2 * h)
        grads[name] = g
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def brute_similarity(adjacency, side):
    """Pairs (i, j) whose neighbor sets intersect, by explicit set intersection."""
    adj = np.asarray(adjacency)
    if side == "skill":
        adj = adj.T
    n = adj.shape[0]
    nbrs = [set(np.flatnonzero(adj[i])) for i in range(n)]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if nbrs[i] & nbrs[j]:
                out[i, j] = 1.0
    return out


def brute_cross_entropy(X, Y, labels):
    """sum_ij -[r log sigma(x_i.y_j) + (1 - r) log(1 - sigma(x_i.y_j))], one pair at a time."""
    total = 0.0
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            x = float(np.dot(X[i], Y[j]))
            p = 1.0 / (1.0 + math.exp(-x))
            not_p = 1.0 / (1.0 + math.exp(x))  # 1 - p without cancellation
            r = labels[i, j]
            total -= r * math.log(p) + (1 - r) * math.log(not_p)
    return total


def brute_auc(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly, ties one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p, n in itertools.product(pos, neg):
        wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def product_layer_reference(Z, Wz, theta, b):
    """Explicit double sums for one question: Z is (3, d_v), returns (l_z, l_p, e)."""
    d = Wz.shape[0]
    gram = np.array([[np.dot(Z[i], Z[j]) for j in range(3)] for i in range(3)])
    l_z = np.array([np.sum(Wz[k] * Z) for k in range(d)])
    l_p = np.array([sum(theta[k, i] * theta[k, j] * gram[i, j] for i in range(3) for j in range(3))
                    for k in range(d)])
    return l_z, l_p, np.maximum(l_z + l_p + b, 0.0)


def datasets_equal(a, b):
    if a.question_ids != b.question_ids or a.skill_ids != b.skill_ids:
        return False
    if len(a.students) != len(b.students):
        return False
    for sa, sb in zip(a.students, b.students):
        if list(sa.records()) != list(sb.records()):
            return False
    return True
