"""Hurst indices and truncated frequency lattices.

A lattice discretizes the box [-2^n, 2^n]^(1+d) into product cells.  Axis 0
is the temporal frequency xi, axes 1..d the spatial frequencies eta.  Cells are
geometric (``cells_per_octave`` per factor of two) and may be capped in width,
which matters on the time axis where the wave kernel has a resonance ridge of
width ~1/t that geometric cells would smear.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ExponentNotIntegrable, StraddlesZero

BORDER_TOL = 1e-12


class Regime(enum.Enum):
    REGULAR = "REGULAR"
    WICK = "WICK"
    UNSUPPORTED = "UNSUPPORTED"


@dataclass(frozen=True)
class HurstVector:
    """Hurst index ``h = (H_0, H_1, ..., H_d)``; ``h[0]`` is temporal."""

    h: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if len(h) < 2:
            raise ValueError("need at least one temporal and one spatial index")
        if not all(0.0 < v < 1.0 for v in h):
            raise ValueError(f"Hurst indices must lie in (0, 1), got {h}")
        object.__setattr__(self, "h", h)

    @classmethod
    def of(cls, *values) -> "HurstVector":
        if len(values) == 1 and not np.isscalar(values[0]):
            values = tuple(values[0])
        return cls(tuple(values))

    @property
    def d(self) -> int:
        return len(self.h) - 1

    @property
    def total(self) -> float:
        return math.fsum(self.h)

    @property
    def spatial_total(self) -> float:
        return math.fsum(self.h[1:])

    @property
    def kappa(self) -> float:
        """Divergence exponent 2(d - 1/2 - sum H); <= 0 in the regular regime."""
        return 2.0 * (self.d - 0.5 - self.total)

    @property
    def regime(self) -> Regime:
        d, s = self.d, self.total
        if s > d - 0.5 + BORDER_TOL:
            return Regime.REGULAR
        if s > d - 0.75 + BORDER_TOL:
            return Regime.WICK
        return Regime.UNSUPPORTED

    def exponents(self) -> tuple:
        """Power-law density exponents ``1 - 2 H_i`` per axis."""
        return tuple(1.0 - 2.0 * v for v in self.h)


def power_measure(lo, hi, p):
    """Vectorized exact ``int_lo^hi |x|^p dx`` for cells not containing 0."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p = float(p)
    if p <= -1.0:
        raise ExponentNotIntegrable(f"exponent {p} <= -1 is not integrable at 0")
    if np.any(lo >= hi):
        raise ValueError("cell bounds must satisfy lo < hi")
    if np.any((lo < 0) & (hi > 0)):
        raise StraddlesZero("cell straddles 0")
    a = np.minimum(np.abs(lo), np.abs(hi))
    b = np.maximum(np.abs(lo), np.abs(hi))
    q = p + 1.0
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    zero = a == 0.0
    out[zero] = b[zero] ** q / q
    nz = ~zero
    # b^q - a^q = -b^q expm1(-q log(b/a)), q > 0: accurate for thin cells, and a^q may underflow
    with np.errstate(over="ignore"):
        ratio = b[nz] / a[nz]
    out[nz] = -(b[nz] ** q) * np.expm1(-q * np.log(ratio)) / q
    return out


def cell_power_measure(cell, exponent: float) -> float:
    """Exact integral of ``|x|^exponent`` over the interval ``cell = (a, b)``."""
    a, b = cell
    return float(power_measure(a, b, exponent))


def _axis_positive(n_level, cpo, low_octaves, max_width):
    """Positive boundaries and the level at which each positive cell appears."""
    ks = range(-low_octaves * cpo, n_level * cpo + 1)
    geo = [0.0] + [2.0 ** (k / cpo) for k in ks]
    bounds = [0.0]
    levels = []
    for j in range(len(geo) - 1):
        a, b = geo[j], geo[j + 1]
        # level of the geometric cell ending at 2^(k/cpo)
        k = j - low_octaves * cpo
        lev = max(0, -(-k // cpo))
        pieces = 1
        if max_width is not None and b - a > max_width:
            pieces = int(math.ceil((b - a) / max_width - 1e-12))
        for i in range(1, pieces + 1):
            bounds.append(b if i == pieces else a + (b - a) * i / pieces)
            levels.append(lev)
    return np.array(bounds), np.array(levels, dtype=int)


@dataclass(frozen=True)
class FrequencyLattice:
    n_level: int
    cells_per_octave: int
    dim: int
    low_octaves: int = 0
    max_width: tuple = None
    axes: tuple = field(init=False, repr=False, compare=False)
    _levels: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_level < 0 or self.cells_per_octave < 1 or self.dim < 1:
            raise ValueError("need n_level >= 0, cells_per_octave >= 1, dim >= 1")
        if self.low_octaves < 0:
            raise ValueError("low_octaves must be >= 0")
        mw = self.max_width
        if mw is None or np.isscalar(mw):
            mw = (mw,) * self.dim
        mw = tuple(None if w is None else float(w) for w in mw)
        if len(mw) != self.dim:
            raise ValueError("max_width needs one entry per axis")
        object.__setattr__(self, "max_width", mw)
        axes, levels = [], []
        for w in mw:
            pos, lev = _axis_positive(self.n_level, self.cells_per_octave, self.low_octaves, w)
            axes.append(np.concatenate([-pos[:0:-1], pos]))
            levels.append(np.concatenate([lev[::-1], lev]))
        for a in axes:
            a.setflags(write=False)
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "_levels", tuple(levels))

    @property
    def shape(self) -> tuple:
        return tuple(len(a) - 1 for a in self.axes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bound(self) -> float:
        return 2.0 ** self.n_level

    def lower(self, axis: int) -> np.ndarray:
        return self.axes[axis][:-1]

    def upper(self, axis: int) -> np.ndarray:
        return self.axes[axis][1:]

    def centers(self, axis: int) -> np.ndarray:
        a = self.axes[axis]
        return 0.5 * (a[:-1] + a[1:])

    def widths(self, axis: int) -> np.ndarray:
        return np.diff(self.axes[axis])

    def cell_levels(self, axis: int) -> np.ndarray:
        """Smallest truncation level whose lattice contains each axis cell."""
        return self._levels[axis]

    def power_measures(self, axis: int, exponent: float) -> np.ndarray:
        return power_measure(self.lower(axis), self.upper(axis), exponent)

    def cells(self):
        """Iterate over cells as tuples of per-axis intervals."""
        import itertools

        per_axis = [list(zip(self.lower(i), self.upper(i))) for i in range(self.dim)]
        return itertools.product(*per_axis)

    def pairing(self, index: Sequence[int]) -> tuple:
        """Index of the reflected cell -C."""
        return tuple(n - 1 - i for n, i in zip(self.shape, index))

    @cached_property
    def shell(self) -> np.ndarray:
        """Per-cell truncation level (max over axes), shape ``self.shape``."""
        out = np.zeros(self.shape, dtype=int)
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = -1
            out = np.maximum(out, self._levels[ax].reshape(sh))
        return out

    def restrict(self, n_level: int) -> "FrequencyLattice":
        """The same lattice family at a different truncation level."""
        return FrequencyLattice(n_level, self.cells_per_octave, self.dim, self.low_octaves, self.max_width)

    def axis_slice(self, axis: int, n_level: int) -> slice:
        """Slice selecting, on ``axis``, the cells of the level-``n_level`` lattice."""
        lev = self._levels[axis]
        idx = np.nonzero(lev <= n_level)[0]
        return slice(int(idx[0]), int(idx[-1]) + 1)


def build_lattice(n_level: int, cells_per_octave: int, dim: int, *, low_octaves: int = 0,
                  max_width=None) -> FrequencyLattice:
    """Build a symmetric lattice on [-2^n, 2^n]^dim.

    ``low_octaves`` extends the geometric refinement below 1 (cells down to
    2^-low_octaves, then one cell touching 0).  ``max_width`` (scalar or one
    entry per axis, ``None`` for no cap) splits wide cells uniformly; the split
    depends on the cell alone, so lattices at different levels stay nested.
    """
    return FrequencyLattice(int(n_level), int(cells_per_octave), int(dim), int(low_octaves), max_width)
