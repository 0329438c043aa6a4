"""Bessel-potential Sobolev norms on the periodic grid and space-time norms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, NotAdmissible
from .field import GridSpec, SpaceTimeField


class TimeNorm(enum.Enum):
    L_INF = "L_INF"
    L_Q = "L_Q"


@dataclass(frozen=True)
class NormSpec:
    sobolev_order: float = 0.0
    integrability: float = 2.0
    domain_mask: np.ndarray = None
    time_norm: TimeNorm = TimeNorm.L_INF
    time_q: float = None

    def __post_init__(self):
        if not (self.integrability >= 1):
            raise ValueError("integrability must be >= 1 (or inf)")
        if self.time_norm is TimeNorm.L_Q and not (self.time_q and self.time_q >= 1):
            raise ValueError("L_Q time norm needs q >= 1")
        if self.domain_mask is not None and not np.any(self.domain_mask):
            raise EmptyMask("domain mask selects no grid point")


def bessel_potential(values, grid: GridSpec, s: float):
    """Apply (1 + |k|^2)^{s/2} over the trailing ``grid.dim`` axes."""
    axes = tuple(range(-grid.dim, 0))
    if s == 0:
        return np.asarray(values)
    mult = (1.0 + grid.abs_wavenumber() ** 2) ** (s / 2.0)
    if np.iscomplexobj(values):
        return np.fft.ifftn(np.fft.fftn(values, axes=axes) * mult, axes=axes)
    half = mult[..., : grid.points // 2 + 1]
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * half, s=grid.shape, axes=axes)


def _lp(values, grid, p, mask):
    if mask is not None:
        if not np.any(mask):
            raise EmptyMask("domain mask selects no grid point")
        vals = values[..., mask]
    else:
        vals = values.reshape(values.shape[: values.ndim - grid.dim] + (-1,))
    a = np.abs(vals)
    top = a.max(axis=-1)
    if math.isinf(p):
        return top
    # scale by the maximum so tiny or huge fields neither underflow nor overflow
    scale = np.where(top > 0, top, 1.0)
    return scale * (np.sum((a / scale[..., None]) ** p, axis=-1) * grid.cell_volume) ** (1.0 / p)


def sobolev_norm(values, grid: GridSpec, s: float = 0.0, p: float = 2.0, mask=None):
    """Discrete W^{s,p} norm: multiplier first, then restriction to ``mask`` and L^p.

    Leading axes of ``values`` beyond the grid shape are treated as a batch.
    """
    values = np.asarray(values)
    if values.shape[values.ndim - grid.dim:] != grid.shape:
        raise ValueError("values do not match the grid")
    res = _lp(bessel_potential(values, grid, s), grid, p, mask)
    return float(res) if np.ndim(res) == 0 else res


def time_norm(series, times, spec_norm: TimeNorm, q: float = None) -> float:
    series = np.asarray(series, dtype=float)
    if spec_norm is TimeNorm.L_INF:
        return float(np.max(series)) if series.size else 0.0
    if series.size < 2:
        raise ValueError("L^q in time needs at least two time points")
    if math.isinf(q):
        return float(np.max(series))
    return float(np.trapezoid(series ** q, times) ** (1.0 / q))


def bochner_norm(field: SpaceTimeField, spec: NormSpec) -> float:
    per_t = sobolev_norm(field.values, field.grid, spec.sobolev_order, spec.integrability, spec.domain_mask)
    return time_norm(np.atleast_1d(per_t), field.times, spec.time_norm, spec.time_q)


def x_s_norm(field: SpaceTimeField, s: float, q, r, T: float = None, *, strict: bool = False, mask=None) -> float:
    """max(||.||_{L^inf([0,T]; W^{s,2})}, ||.||_{L^q([0,T]; L^r)})."""
    if strict:
        from .admiss import Kind, check_admissible

        res = check_admissible(q, r, field.grid.dim, s, Kind.ADMISSIBLE)
        if not res.ok:
            raise NotAdmissible(f"({q}, {r}) is not ({field.grid.dim}, {s})-admissible: {res.violations}")
    f = field
    if T is not None:
        keep = field.times <= T + 1e-12
        f = SpaceTimeField(field.times[keep], field.grid, field.values[keep], field.meta)
    qf = float(q)
    a = bochner_norm(f, NormSpec(s, 2.0, mask, TimeNorm.L_INF))
    b = bochner_norm(f, NormSpec(0.0, float(r), mask, TimeNorm.L_Q, qf))
    return max(a, b)
