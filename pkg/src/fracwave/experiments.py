"""Cauchy-decay studies for the truncated fields Psi_n and their Wick squares.

For a stationary field f with spectral density S, the multiplier
(1 - Laplacian)^{-a/2} acts on the density as (1 + |lambda|^2)^{-a}, so

    E || f ||^2_{W^{-a,2}(D)} = |D| int (1 + |lambda|^2)^{-a} S(lambda) dlambda

(multiplier on the whole line first, restriction to D second).  With coherent
nesting Psi_{n+1} - Psi_n is the independent shell, whose density is
S_{n+1} - S_n; the Wick squares have covariance 2 C^2, whence density
2 (S_{n+1} * S_{n+1} - S_n * S_n).  In d = 1 both are evaluated by
quadrature; in d = 2 by Monte Carlo on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .field import GridSpec, TimeSliceSampler
from .gamma import gamma_abs2
from .lattice import HurstVector, Regime
from .norms import sobolev_norm
from .renorm import sigma_quadrature
from .solver import count_inversions, decreasing_with_one_inversion


@dataclass
class CauchyReport:
    order: int
    method: str
    alpha: float
    levels: list
    values: list
    errors: list
    inversions: int
    passed: bool
    extra: dict = field(default_factory=dict)

    def rows(self):
        for (a, b), v, e in zip(zip(self.levels[:-1], self.levels[1:]), self.values, self.errors):
            yield a, b, v, e

    def as_dict(self):
        return {"order": self.order, "method": self.method, "alpha": self.alpha, "levels": list(self.levels),
                "values": list(self.values), "errors": list(self.errors), "inversions": self.inversions,
                "passed": self.passed, **self.extra}


def default_alpha(hurst: HurstVector, margin: float = 0.05) -> float:
    """(d - 1/2 - sum H) + margin, the smoothing order used for WICK-regime studies."""
    return hurst.d - 0.5 - hurst.total + margin


def _strictly_decreasing_one_inversion(values, min_levels=4):
    return decreasing_with_one_inversion(values, min_levels)


def _spectral_weights_1d(hurst, levels, t, nodes, width):
    """Quadrature nodes eta_j > 0 and W[n][j] = w_j S_n(eta_j) (S_n the density on the line)."""
    top = 2.0 ** max(levels)
    cut = [2.0 ** n for n in levels]
    brk = [2.0 ** k for k in range(-8, max(levels) + 1)]
    edges = _quad.panel_edges(0.0, top, width, brk)
    eta, w_eta, _ = _quad.weighted_rule(edges, 1 - 2 * hurst.h[1], nodes)
    xi, w_xi, _ = _quad.weighted_rule(edges, 1 - 2 * hurst.h[0], nodes)
    wx = _quad.prefix_weights(xi, w_xi, cut)  # (Nxi, L)
    dens = np.empty((eta.size, len(levels)))
    for i in range(0, eta.size, 256):
        dens[i:i + 256] = 2.0 * (gamma_abs2(t, xi[None, :], eta[i:i + 256, None]) @ wx)
    inside = eta[:, None] <= np.asarray(cut)[None, :] * (1 + 1e-14)
    return eta, (w_eta[:, None] * dens * inside).T


def _quadratic_forms(eta, W, kern, chunk=512):
    """q_l = sum_ij W_li W_lj [2 K(eta_i + eta_j) + 2 K(eta_i - eta_j)] for every row l of W
    (even densities folded onto eta > 0)."""
    tot = np.zeros(W.shape[0])
    for i in range(0, eta.size, chunk):
        e = eta[i:i + chunk, None]
        m = 2.0 * kern(e + eta[None, :]) + 2.0 * kern(e - eta[None, :])
        tot += np.einsum("li,il->l", W[:, i:i + chunk], m @ W.T)
    return tot


def _cauchy_values_1d(hurst, levels, t, alpha, order, nodes, width, volume):
    eta, W = _spectral_weights_1d(hurst, levels, t, nodes, width)
    if order == 1:
        mult = 2.0 * (1.0 + eta ** 2) ** (-alpha)
        return [volume * float((W[k + 1] - W[k]) @ mult) for k in range(len(levels) - 1)]
    kern = lambda lam: (1.0 + lam ** 2) ** (-2.0 * alpha)  # noqa: E731
    quad = _quadratic_forms(eta, W, kern)
    return [volume * 2.0 * (quad[k + 1] - quad[k]) for k in range(len(levels) - 1)]


def cauchy_decay_quadrature(hurst: HurstVector, levels, t: float = 1.0, *, alpha: float = None, order: int = 1,
                            domain_half_width: float = 0.5, nodes: int = 10) -> CauchyReport:
    """E||Psi_{n+1} - Psi_n||^2_{W^{-alpha,2}(D)} (order 1) or E||W_{n+1} - W_n||^2_{W^{-2 alpha,2}(D)}
    (order 2, Wick squares) for d = 1 by quadrature.  The error column is the
    difference between ``nodes`` and ``nodes - 4`` point panels."""
    if hurst.d != 1:
        raise ValueError("the quadrature route is implemented for d = 1")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    levels = sorted(int(n) for n in levels)
    alpha = default_alpha(hurst) if alpha is None else float(alpha)
    width = min(1.0, 1.0 / t)
    vol = (2.0 * domain_half_width) ** hurst.d
    hi = _cauchy_values_1d(hurst, levels, t, alpha, order, nodes, width, vol)
    lo = _cauchy_values_1d(hurst, levels, t, alpha, order, nodes - 4, width, vol)
    err = [abs(a - b) for a, b in zip(hi, lo)]
    inv = count_inversions(hi)
    return CauchyReport(order, "quadrature", alpha, levels, hi, err, inv, _strictly_decreasing_one_inversion(hi),
                        {"t": t, "domain_half_width": domain_half_width})


def cauchy_decay_monte_carlo(hurst: HurstVector, levels, t: float, grid: GridSpec, realizations: int, seed: int, *,
                             alpha: float = None, orders=(1, 2), domain_half_width: float = 0.5,
                             lattice=None) -> dict:
    """Monte Carlo version on the grid: {order: CauchyReport}.

    Fields are drawn with ``TimeSliceSampler`` (exact in law at one time).
    Every realization uses the same draws at every level (coherent nesting);
    both orders come from the same draws.  The error column is one
    standard error.
    """
    from .renorm import default_mc_lattice

    orders = tuple(int(o) for o in orders)
    if not orders or any(o not in (1, 2) for o in orders):
        raise ValueError("orders must be drawn from (1, 2)")
    levels = sorted(int(n) for n in levels)
    alpha = default_alpha(hurst) if alpha is None else float(alpha)
    lattice = lattice or default_mc_lattice(max(levels), hurst.d)
    mask = grid.box_mask(domain_half_width)
    sig = {n: sigma_quadrature(hurst, n, t, 1e-8) for n in levels} if 2 in orders else {}
    sampler = TimeSliceSampler(hurst, lattice, levels, t)
    samples = {o: np.empty((realizations, len(levels) - 1)) for o in orders}
    for k in range(realizations):
        f = sampler.sample(grid, seed, k)
        for o in orders:
            vals = [f[n] if o == 1 else f[n] * f[n] - sig[n] for n in levels]
            diffs = np.stack([b - a for a, b in zip(vals[:-1], vals[1:])])
            samples[o][k] = sobolev_norm(diffs, grid, -alpha * o, 2.0, mask) ** 2
    out = {}
    for o in orders:
        mean = samples[o].mean(axis=0)
        se = samples[o].std(axis=0, ddof=1) / math.sqrt(realizations) if realizations > 1 else np.full(mean.shape, np.inf)
        vals = [float(v) for v in mean]
        out[o] = CauchyReport(o, "monte_carlo", alpha, levels, vals, [float(e) for e in se], count_inversions(vals),
                              _strictly_decreasing_one_inversion(vals),
                              {"t": t, "domain_half_width": domain_half_width, "realizations": realizations,
                               "grid_points": grid.points, "grid_half_width": grid.half_width})
    return out


def check_wick_regime(hurst: HurstVector) -> bool:
    return hurst.regime is Regime.WICK
