"""Pure-Python/numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np


def pvar_chain(dist, p):
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    K = dist.shape[0]
    best = np.zeros(K)
    # math.pow is libm pow, as in the compiled kernel; np.power may differ by an ulp
    powed = np.array([math.pow(v, p) for v in dist.ravel().tolist()]).reshape(K, K)
    for j in range(1, K):
        cand = best[:j] + powed[:j, j]
        best[j] = max(0.0, cand.max())
    return best


def pairwise_l2(X, weight):
    X = np.ascontiguousarray(X, dtype=np.complex128)
    K = X.shape[0]
    out = np.zeros((K, K))
    for i in range(K):
        diff = X[i + 1:] - X[i]
        acc = (diff.real ** 2 + diff.imag ** 2).sum(axis=1)
        out[i, i + 1:] = np.sqrt(weight * acc)
    return out + out.T
