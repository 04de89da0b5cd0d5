"""Shared generators for randomized tests (seeded, reproducible)."""

import numpy as np


def random_stable(rng, m, margin=0.3, scale=1.0):
    """Random positively stable matrix: shift a random draw right of the axis."""
    a = rng.standard_normal((m, m)) * scale
    lam = np.linalg.eigvals(a)
    return a + (margin - lam.real.min()) * np.eye(m)


def random_spd(rng, m, lo=0.3, hi=3.0):
    """Random symmetric positive definite matrix with spectrum in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return (q * rng.uniform(lo, hi, m)) @ q.T


def random_psd_root(rng, m):
    """Random symmetric PSD matrix (usable as a known square root)."""
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return (q * rng.uniform(0.0, 2.0, m)) @ q.T


def random_normal_stable(rng, m, lo=0.3, hi=2.0):
    """Random normal, positively stable matrix (orthogonal conjugate of
    block-diagonal 2x2 rotations and positive scalars)."""
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    d = np.zeros((m, m))
    j = 0
    while j < m:
        if j + 1 < m and rng.random() < 0.6:
            a = rng.uniform(lo, hi)
            b = rng.uniform(0.2, 2.0)
            d[j, j] = a
            d[j + 1, j + 1] = a
            d[j, j + 1] = -b
            d[j + 1, j] = b
            j += 2
        else:
            d[j, j] = rng.uniform(lo, hi)
            j += 1
    return q @ d @ q.T


def match_eigenvalues(computed, expected):
    """Greedy nearest matching; returns max absolute pairing error."""
    pool = list(computed)
    worst = 0.0
    for target in expected:
        idx = int(np.argmin([abs(target - z) for z in pool]))
        worst = max(worst, abs(target - pool[idx]))
        pool.pop(idx)
    return worst
