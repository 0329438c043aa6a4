"""Composite Gauss rules for power-weighted integrals on [0, b]."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def _jacobi(n, beta):
    # weight (1 + x)^beta on [-1, 1]
    return roots_jacobi(n, 0.0, beta)


def panel_edges(lo, hi, width, breakpoints=()):
    """Panel edges on [lo, hi] with every breakpoint an edge and panels <= width."""
    pts = sorted({lo, hi, *(b for b in breakpoints if lo < b < hi)})
    edges = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(np.ceil((b - a) / width - 1e-12)))
        edges.extend(a + (b - a) * np.arange(1, k + 1) / k)
        edges[-1] = b
    return np.asarray(edges, dtype=float)


def weighted_rule(edges, beta, nodes):
    """Nodes and weights for int x^beta f(x) dx over the panels in ``edges``.

    When the first edge is 0 a Gauss-Jacobi rule absorbs the x^beta
    singularity there; all other panels use Gauss-Legendre with the weight
    folded into the weights.  Returns (x, w, panel_index).
    """
    x_all, w_all, idx = [], [], []
    xl, wl = _legendre(nodes)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if a == 0.0 and beta != 0.0:
            xj, wj = _jacobi(nodes, float(beta))
            x = 0.5 * b * (1 + xj)
            w = wj * (0.5 * b) ** (beta + 1)
        else:
            x = 0.5 * (a + b) + 0.5 * (b - a) * xl
            w = 0.5 * (b - a) * wl * x ** beta
        x_all.append(x)
        w_all.append(w)
        idx.append(np.full(nodes, k))
    return np.concatenate(x_all), np.concatenate(w_all), np.concatenate(idx)


def prefix_weights(x, w, cutoffs):
    """Matrix W with W[j, k] = w[j] * (x[j] <= cutoffs[k])."""
    cut = np.asarray(cutoffs, dtype=float)
    return w[:, None] * (x[:, None] <= cut[None, :] * (1 + 1e-14))
