"""Independent reference values used by the tests.

Nothing here imports the package: each oracle is derived directly (closed
forms, exhaustive enumeration) so it can check the code without sharing
its conventions by construction.
"""
import itertools
import math

import numpy as np


def gaussian_free_solution(coords, t, width, amplitude, coeff=1.0):
    """Exact solution of ``i u_t + coeff Lap u = 0`` with ``u0 = a exp(-|x|^2/(2 w^2))``.

    Per axis the Fourier symbol exp(-w^2 xi^2/2) picks up exp(-i coeff t xi^2),
    i.e. w^2 -> w^2 + 2 i coeff t, and the amplitude factor w/sqrt(w^2 + 2 i coeff t).
    """
    z = width ** 2 + 2j * coeff * t
    out = amplitude
    for c in coords:
        out = out * (width / np.sqrt(z)) * np.exp(-(c ** 2) / (2.0 * z))
    return out


def gaussian_transform(kvecs, width, amplitude):
    """int a exp(-|x|^2/(2w^2)) exp(-i x.xi) dx = a (w sqrt(2 pi))^d exp(-w^2 |xi|^2/2)."""
    d = len(kvecs)
    ksq = sum(k * k for k in kvecs)
    return amplitude * (width * math.sqrt(2 * math.pi)) ** d * np.exp(-0.5 * width ** 2 * ksq)


def gaussian_mass(width, amplitude, dim):
    return amplitude ** 2 * (math.pi * width ** 2) ** (dim / 2.0)


def brute_force_p_variation(D, p):
    """Max over all subsequences (length >= 2) of sum D[a_{k-1}, a_k]**p, to the 1/p.

    Sums run left to right with the builtin float ``**`` (libm pow).
    """
    K = D.shape[0]
    best = 0.0
    for m in range(2, K + 1):
        for idx in itertools.combinations(range(K), m):
            s = 0.0
            for a, b in zip(idx[:-1], idx[1:]):
                s = s + float(D[a, b]) ** p
            if s > best:
                best = s
    return best ** (1.0 / p)


def single_mode_bilinear_ratio(T, box_length, dim):
    """Two plane waves: |product| = 1, so the L^p norm is (2T L^d)^{1/p} over L^d."""
    p = 1.0 + 2.0 / dim
    return (2.0 * T * box_length ** dim) ** (1.0 / p) / box_length ** dim
