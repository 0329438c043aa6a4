"""Sampling of the truncated noise B_n and the linear solution Psi_n.

Both fields are finite sums over lattice cells C = (xi_C, eta_C):

    Psi_n(t, x) = sum_C Z_C a_C i^{d+1} sgn(xi_C) prod sgn(eta_C,i) e^{i <eta_C, x>} gamma_t(xi_C, |eta_C|)
    B_n(t, x)   = sum_C Z_C a_C (e^{i t xi_C} - 1)/|xi_C| prod (e^{i x_i eta_C,i} - 1)/|eta_C,i|

with a_C^2 = prod_axes int_{C_axis} |u|^{1 - 2H_axis} du and Hermitian
Gaussian draws Z_{-C} = conj(Z_C).  Time dependence of Psi_n is advanced by
an exact recursion (the per-mode wave equation driven by e^{i xi t}), space
by a separable non-uniform Fourier sum evaluated at the exact cell centers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _quad
from .errors import DimensionUnsupported, GridAliasing, ToleranceNotReached
from .gamma import gamma_closed, gamma_dt, gamma_increment
from .lattice import FrequencyLattice, HurstVector

MAX_SAMPLING_DIM = 4
REALNESS_TOL = 1e-9


class FieldKind(enum.Enum):
    NOISE_B = "NOISE_B"
    LINEAR_PSI = "LINEAR_PSI"
    WICK_PSI2 = "WICK_PSI2"
    SOLUTION_V = "SOLUTION_V"
    SOLUTION_U = "SOLUTION_U"


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L)^d with ``points`` nodes per axis."""

    dim: int
    points: int
    half_width: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def nyquist(self) -> float:
        return math.pi / self.spacing

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def coords(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    def mesh(self):
        return np.meshgrid(*([self.coords()] * self.dim), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.mesh()))

    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def abs_wavenumber(self) -> np.ndarray:
        ks = np.meshgrid(*([self.wavenumbers()] * self.dim), indexing="ij")
        return np.sqrt(sum(k ** 2 for k in ks))

    def box_mask(self, half_width: float) -> np.ndarray:
        m = np.ones(self.shape, dtype=bool)
        for c in self.mesh():
            m &= np.abs(c) <= half_width + 1e-12
        return m

    def as_dict(self):
        return {"dim": self.dim, "points": self.points, "half_width": self.half_width}


@dataclass
class SpaceTimeField:
    times: np.ndarray
    grid: GridSpec
    values: np.ndarray  # (len(times),) + grid.shape
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.values.shape != (self.times.size,) + self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match times x grid")

    @property
    def kind(self) -> FieldKind:
        return FieldKind(self.meta.get("kind"))

    def with_values(self, values, **meta):
        return SpaceTimeField(self.times, self.grid, values, dict(self.meta, **meta))


def harmonizable_constant(h: float) -> float:
    """int_R |e^{iu} - 1|^2 |u|^{-1-2h} du = pi / (h Gamma(2h) sin(pi h)); 2 pi at h = 1/2."""
    return math.pi / (h * math.gamma(2 * h) * math.sin(math.pi * h))


# ---------------------------------------------------------------------------
# noise


def _check_dim(hurst: HurstVector, lattice: FrequencyLattice):
    if lattice.dim != hurst.d + 1:
        raise ValueError(f"lattice has {lattice.dim} axes, Hurst vector needs {hurst.d + 1}")
    if hurst.d > MAX_SAMPLING_DIM:
        raise DimensionUnsupported(f"sampling supports d <= {MAX_SAMPLING_DIM}, got d={hurst.d}")


def noise_coefficients(lattice: FrequencyLattice, seed: int, stream_index: int, n_level: int = None) -> np.ndarray:
    """Hermitian complex Gaussian draws on the lattice (E|Z|^2 = 1).

    Draws for shell ``l`` (cells first present at level l) come from their own
    generator keyed by (seed, stream, l), taken in C order over the shell.
    The shell of a cell and the relative order within a shell are the same
    in every lattice of one family, so a level-n lattice sees exactly the
    draws of the level-m lattice restricted to its cells.
    """
    top = lattice.n_level if n_level is None else min(n_level, lattice.n_level)
    shell = lattice.shell
    z = np.zeros(lattice.shape, dtype=complex)
    for lev in range(top + 1):
        mask = shell == lev
        cnt = int(mask.sum())
        if not cnt:
            continue
        rng = np.random.default_rng([int(seed), int(stream_index), lev])
        g = rng.standard_normal((cnt, 2))
        z[mask] = (g[:, 0] + 1j * g[:, 1]) * math.sqrt(0.5)
    # xi > 0 half is free; xi < 0 half mirrors it through -C
    half = lattice.shape[0] // 2
    flipped = np.conj(z[(slice(None, None, -1),) * lattice.dim])
    z[:half] = flipped[:half]
    return z


@dataclass(frozen=True)
class NoiseRealization:
    seed: int
    stream_index: int
    lattice: FrequencyLattice

    @cached_property
    def coeffs(self) -> np.ndarray:
        c = noise_coefficients(self.lattice, self.seed, self.stream_index)
        c.setflags(write=False)
        return c

    def coefficient(self, index) -> complex:
        return complex(self.coeffs[tuple(index)])


# ---------------------------------------------------------------------------
# cell data


def cell_amplitudes(hurst: HurstVector, lattice: FrequencyLattice) -> list:
    """Per-axis square roots of the exact power-law cell measures."""
    return [np.sqrt(lattice.power_measures(ax, 1.0 - 2.0 * hurst.h[ax])) for ax in range(lattice.dim)]


def _eta_radius(lattice):
    cs = np.meshgrid(*[lattice.centers(ax) for ax in range(1, lattice.dim)], indexing="ij")
    return np.sqrt(sum(c ** 2 for c in cs))


def level_mask(lattice: FrequencyLattice, n_level: int, truncation: str = "ball") -> np.ndarray:
    """Cells of the level-n truncation: box |xi|, |eta_i| <= 2^n, optionally |eta| <= 2^n."""
    m = lattice.shell <= n_level
    if truncation == "ball":
        m = m & (_eta_radius(lattice) <= 2.0 ** n_level * (1 + 1e-12))[None]
    elif truncation != "box":
        raise ValueError(f"unknown truncation {truncation!r}")
    return m


def psi_weights(hurst: HurstVector, lattice: FrequencyLattice) -> np.ndarray:
    """Deterministic per-cell factor a_C i^{d+1} sgn(xi) prod sgn(eta_i)."""
    amps = cell_amplitudes(hurst, lattice)
    w = np.ones(lattice.shape, dtype=complex) * (1j) ** (hurst.d + 1)
    for ax in range(lattice.dim):
        sh = [1] * lattice.dim
        sh[ax] = -1
        w = w * (amps[ax] * np.sign(lattice.centers(ax))).reshape(sh)
    return w


def _steps(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be sorted and >= 0")
    prev = np.concatenate([[0.0], times[:-1]])
    return prev, times - prev


def evolve_modes(coef, xi, r, times):
    """A(t, eta) = sum_xi coef[..., xi, eta] gamma_t(xi, r_eta) at every time.

    ``coef`` has the xi axis second to last and flattened eta last.  Uses the
    exact one-step recursion of the forced oscillator A'' + r^2 A = sum c e^{i xi t}
    so each step costs one (batched) product over xi.
    """
    prev, steps = _steps(times)
    batch = coef.shape[:-2]
    ne = coef.shape[-1]
    out = np.empty(batch + (len(times), ne), dtype=complex)
    keys = np.round(steps, 14)
    forcing = np.empty_like(out)
    dforcing = np.empty_like(out)
    for h in np.unique(keys):
        sel = np.nonzero(keys == h)[0]
        if h == 0:
            forcing[..., sel, :] = 0
            dforcing[..., sel, :] = 0
            continue
        hh = float(steps[sel[0]])
        g = gamma_closed(hh, xi[:, None], r[None, :])
        dg = gamma_dt(hh, xi[:, None], r[None, :])
        ph = np.exp(1j * np.outer(prev[sel], xi))  # (J, Nxi)
        forcing[..., sel, :] = np.matmul(ph, coef * g)
        dforcing[..., sel, :] = np.matmul(ph, coef * dg)
    a = np.zeros(batch + (ne,), dtype=complex)
    da = np.zeros_like(a)
    for j, h in enumerate(steps):
        if h > 0:
            c, s = np.cos(r * h), np.sin(r * h)
            a, da = c * a + (s / r) * da + forcing[..., j, :], -r * s * a + c * da + dforcing[..., j, :]
        out[..., j, :] = a
    return out


def _separable_synthesis(modes, factors):
    """sum over eta of modes[t, eta_1..eta_d] prod factors[i][eta_i, x_i]."""
    out = modes
    for f in factors:
        # contract the first eta axis (position 1) and append the x axis at the end
        out = np.tensordot(out, f, axes=([1], [0]))
    return out


def _finish_real(z, what):
    re, im = z.real, z.imag
    scale = np.sqrt(np.mean(re ** 2)) if re.size else 0.0
    resid = float(np.max(np.abs(im))) if im.size else 0.0
    if scale > 0 and resid > REALNESS_TOL * scale:
        raise ArithmeticError(f"{what}: imaginary residue {resid:.3g} vs rms {scale:.3g}")
    return np.ascontiguousarray(re), resid / scale if scale > 0 else 0.0


def _check_grid(lattice, n_level, grid: GridSpec, d):
    if grid.dim != d:
        raise ValueError(f"grid dimension {grid.dim} != d={d}")
    if 2.0 ** n_level >= grid.nyquist:
        raise GridAliasing(f"lattice bound 2^{n_level} exceeds grid Nyquist {grid.nyquist:.4g}")


def _active(lattice, n_level, truncation):
    """Index slices of the level-n sub-box and its cell mask."""
    sl = tuple(lattice.axis_slice(ax, n_level) for ax in range(lattice.dim))
    mask = level_mask(lattice, n_level, truncation)[sl]
    return sl, mask


def psi_modes(hurst, lattice, n_level, times, coeffs, truncation="ball"):
    """Spatial Fourier modes of Psi_n: array (batch..., T, eta_1, ..., eta_d) plus eta centers."""
    sl, mask = _active(lattice, n_level, truncation)
    w = psi_weights(hurst, lattice)[sl] * mask
    c = coeffs[(Ellipsis,) + sl] * w
    xi = lattice.centers(0)[sl[0]]
    etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
    r = np.sqrt(sum(e ** 2 for e in np.meshgrid(*etas, indexing="ij"))).ravel()
    eshape = c.shape[-(lattice.dim - 1):]
    flat = c.reshape(c.shape[:-(lattice.dim - 1)] + (-1,))
    modes = evolve_modes(flat, xi, r, times)
    return modes.reshape(modes.shape[:-1] + eshape), etas


def sample_psi_n(hurst: HurstVector, n_level: int, lattice: FrequencyLattice, grid: GridSpec, times, seed: int,
                 stream_index: int = 0, *, truncation: str = "ball") -> SpaceTimeField:
    """One realization of Psi_n on ``times`` x ``grid``."""
    _check_dim(hurst, lattice)
    if n_level > lattice.n_level:
        raise ValueError("n_level exceeds the lattice level")
    _check_grid(lattice, n_level, grid, hurst.d)
    times = np.asarray(times, dtype=float)
    z = noise_coefficients(lattice, seed, stream_index, n_level)
    modes, etas = psi_modes(hurst, lattice, n_level, times, z, truncation)
    x = grid.coords()
    vals = _separable_synthesis(modes, [np.exp(1j * np.outer(e, x)) for e in etas])
    vals, resid = _finish_real(vals, "Psi_n")
    meta = {"kind": FieldKind.LINEAR_PSI, "n_level": int(n_level), "hurst": list(hurst.h), "seed": int(seed),
            "stream_index": int(stream_index), "truncation": truncation, "imag_residue": resid}
    return SpaceTimeField(times, grid, vals, meta)


def sample_b_n(hurst: HurstVector, n_level: int, lattice: FrequencyLattice, grid: GridSpec, times, seed: int,
               stream_index: int = 0, *, truncation: str = "ball") -> SpaceTimeField:
    """One realization of the truncated noise B_n."""
    _check_dim(hurst, lattice)
    _check_grid(lattice, n_level, grid, hurst.d)
    times = np.asarray(times, dtype=float)
    z = noise_coefficients(lattice, seed, stream_index, n_level)
    sl, mask = _active(lattice, n_level, truncation)
    amps = cell_amplitudes(hurst, lattice)
    c = z[sl] * mask
    for ax in range(lattice.dim):
        sh = [1] * lattice.dim
        sh[ax] = -1
        c = c * amps[ax][sl[ax]].reshape(sh)
    xi = lattice.centers(0)[sl[0]]
    factors = [(np.exp(1j * np.outer(times, xi)) - 1) / np.abs(xi)]
    x = grid.coords()
    for ax in range(1, lattice.dim):
        e = lattice.centers(ax)[sl[ax]]
        factors.append((np.exp(1j * np.outer(e, x)) - 1) / np.abs(e)[:, None])
    vals = np.tensordot(factors[0], c, axes=([1], [0]))
    vals = _separable_synthesis(vals, factors[1:])
    vals, resid = _finish_real(vals, "B_n")
    meta = {"kind": FieldKind.NOISE_B, "n_level": int(n_level), "hurst": list(hurst.h), "seed": int(seed),
            "stream_index": int(stream_index), "truncation": truncation, "imag_residue": resid}
    return SpaceTimeField(times, grid, vals, meta)


def psi_at_points(hurst: HurstVector, lattice: FrequencyLattice, levels, times, points, seed: int, streams,
                  *, truncation: str = "ball", chunk: int = 64) -> dict:
    """Psi_n(t, x) for many realizations at a few (t, x) locations.

    Returns {level: array (len(streams), len(times), len(points))}; every
    level is computed from the same draws (coherent nesting).
    """
    _check_dim(hurst, lattice)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != hurst.d:
        raise ValueError("points need d coordinates")
    times = np.asarray(times, dtype=float)
    levels = [int(v) for v in levels]
    top = max(levels)
    streams = list(streams)
    sl = tuple(lattice.axis_slice(ax, top) for ax in range(lattice.dim))
    w = psi_weights(hurst, lattice)[sl]
    xi = lattice.centers(0)[sl[0]]
    etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
    emesh = np.meshgrid(*etas, indexing="ij")
    r = np.sqrt(sum(e ** 2 for e in emesh)).ravel()
    phase = np.exp(1j * sum(np.multiply.outer(e.ravel(), points[:, i]) for i, e in enumerate(emesh)))
    # kernel G[t, xi, eta] for direct evaluation
    G = gamma_closed(times[:, None, None], xi[None, :, None], r[None, None, :])
    masks = {lev: level_mask(lattice, lev, truncation)[sl].reshape(len(xi), -1) for lev in levels}
    out = {lev: np.empty((len(streams), len(times), len(points))) for lev in levels}
    for i0 in range(0, len(streams), chunk):
        ids = streams[i0:i0 + chunk]
        z = np.stack([noise_coefficients(lattice, seed, s, top)[sl] for s in ids])
        c = (z * w).reshape(len(ids), len(xi), -1)
        for lev in levels:
            # modes[b, t, eta] = sum_xi c G
            modes = np.einsum("bxe,txe->bte", c * masks[lev], G, optimize=True)
            vals = modes @ phase
            out[lev][i0:i0 + len(ids)] = vals.real
    return out


def psi_kernel(hurst: HurstVector, lattice: FrequencyLattice, top: int, t: float) -> np.ndarray:
    """psi_weights * gamma_t(xi, |eta|) on the level-``top`` sub-box."""
    sl = tuple(lattice.axis_slice(ax, top) for ax in range(lattice.dim))
    xi = lattice.centers(0)[sl[0]]
    etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
    r = np.sqrt(sum(e ** 2 for e in np.meshgrid(*etas, indexing="ij")))
    return psi_weights(hurst, lattice)[sl] * gamma_closed(float(t), xi.reshape((-1,) + (1,) * hurst.d), r[None])


def psi_levels_on_grid(hurst: HurstVector, lattice: FrequencyLattice, levels, t: float, grid: GridSpec, seed: int,
                       stream_index: int = 0, *, truncation: str = "ball", kernel=None) -> dict:
    """{level: Psi_n(t, .) on ``grid``} at one time for several levels from one draw.

    Equal to ``sample_psi_n(...).values[0]`` level by level, but gamma_t is
    evaluated once and each level only re-sums the masked cells.  ``kernel``
    may pass the precomputed product psi_weights * gamma_t over the top-level
    sub-box (see ``psi_kernel``) when many draws share one time.
    """
    _check_dim(hurst, lattice)
    levels = sorted(int(v) for v in levels)
    top = levels[-1]
    _check_grid(lattice, top, grid, hurst.d)
    sl = tuple(lattice.axis_slice(ax, top) for ax in range(lattice.dim))
    xi = lattice.centers(0)[sl[0]]
    etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
    if kernel is None:
        kernel = psi_kernel(hurst, lattice, top, t)
    c = noise_coefficients(lattice, seed, stream_index, top)[sl] * kernel
    x = grid.coords()
    factors = [np.exp(1j * np.outer(e, x)) for e in etas]
    out = {}
    for lev in levels:
        modes = np.sum(c * level_mask(lattice, lev, truncation)[sl], axis=0)[None]
        out[lev] = _finish_real(_separable_synthesis(modes, factors), "Psi_n")[0][0]
    return out


class TimeSliceSampler:
    """Psi_n(t, .) at one fixed time, sampled in law from shell variances.

    At fixed t the xi-sum of Psi_n over the cells of one shell l at spatial
    cell eta is a circular complex Gaussian G_l(eta) with variance
    v_l(eta) = sum_xi |a_C gamma_t(xi, |eta|)|^2, independent across shells
    and across eta up to the mirror G_l(-eta) = conj G_l(eta).  Drawing the
    G_l directly gives the same joint law over levels as ``sample_psi_n``
    (coherent nesting included) at a cost independent of the xi axis.  The
    draws are not pathwise equal to those of ``sample_psi_n``.
    """

    def __init__(self, hurst: HurstVector, lattice: FrequencyLattice, levels, t: float, *,
                 truncation: str = "ball", chunk: int = 64):
        _check_dim(hurst, lattice)
        self.hurst, self.lattice, self.t = hurst, lattice, float(t)
        self.levels = sorted(int(v) for v in levels)
        top = self.levels[-1]
        sl = tuple(lattice.axis_slice(ax, top) for ax in range(lattice.dim))
        self.etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
        emesh = np.meshgrid(*self.etas, indexing="ij")
        r = np.sqrt(sum(e ** 2 for e in emesh))
        xi = lattice.centers(0)[sl[0]]
        xlev = lattice.cell_levels(0)[sl[0]]
        amps = cell_amplitudes(hurst, lattice)
        a_eta = np.ones(r.shape)
        for ax in range(1, lattice.dim):
            sh = [1] * hurst.d
            sh[ax - 1] = -1
            a_eta = a_eta * amps[ax][sl[ax]].reshape(sh)
        a_xi = amps[0][sl[0]]
        self.shells = list(range(int(xlev.min()), top + 1))
        var = np.zeros((len(self.shells),) + r.shape)
        for i in range(0, xi.size, chunk):
            g2 = np.abs(gamma_closed(self.t, xi[i:i + chunk].reshape((-1,) + (1,) * hurst.d), r[None])) ** 2
            g2 *= (a_xi[i:i + chunk] ** 2).reshape((-1,) + (1,) * hurst.d)
            for j, lev in enumerate(xlev[i:i + chunk]):
                var[self.shells.index(int(lev))] += g2[j]
        self.std = np.sqrt(var) * a_eta[None]
        eta_lev = np.maximum.reduce(np.meshgrid(*[lattice.cell_levels(ax)[sl[ax]] for ax in range(1, lattice.dim)],
                                                indexing="ij"))
        self.masks = {}
        for n in self.levels:
            m = eta_lev <= n
            if truncation == "ball":
                m = m & (r <= 2.0 ** n * (1 + 1e-12))
            elif truncation != "box":
                raise ValueError(f"unknown truncation {truncation!r}")
            self.masks[n] = m

    def variance(self, n_level: int) -> float:
        """Lattice value of E[Psi_n(t, x)^2]."""
        use = np.array([lev <= n_level for lev in self.shells])
        return float(np.sum(self.std[use] ** 2 * self.masks[n_level]))

    def _draw(self, seed, stream):
        rng = np.random.default_rng([int(seed), int(stream), 0x5EC7])
        shape = self.std.shape
        z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)
        # Hermitian mirror through eta -> -eta on every spatial axis
        flipped = np.conj(z[(slice(None),) + (slice(None, None, -1),) * self.hurst.d])
        half = shape[1] // 2
        z[:, :half] = flipped[:, :half]
        return z * self.std

    def sample(self, grid: GridSpec, seed: int, stream_index: int = 0) -> dict:
        _check_grid(self.lattice, self.levels[-1], grid, self.hurst.d)
        g = self._draw(seed, stream_index)
        partial = np.cumsum(g, axis=0)
        x = grid.coords()
        factors = [np.exp(1j * np.outer(e, x)) for e in self.etas]
        out = {}
        for n in self.levels:
            k = max(i for i, lev in enumerate(self.shells) if lev <= n)
            modes = (partial[k] * self.masks[n])[None]
            out[n] = _finish_real(_separable_synthesis(modes, factors), "Psi_n")[0][0]
        return out


def b_at_points(hurst: HurstVector, lattice: FrequencyLattice, n_level: int, times, points, seed: int, streams,
                *, truncation: str = "ball", chunk: int = 64) -> np.ndarray:
    """B_n(t, x) for many realizations: array (len(streams), len(times), len(points))."""
    _check_dim(hurst, lattice)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    times = np.asarray(times, dtype=float)
    sl, mask = _active(lattice, n_level, truncation)
    amps = cell_amplitudes(hurst, lattice)
    w = mask.astype(float)
    for ax in range(lattice.dim):
        sh = [1] * lattice.dim
        sh[ax] = -1
        w = w * amps[ax][sl[ax]].reshape(sh)
    xi = lattice.centers(0)[sl[0]]
    ft = (np.exp(1j * np.outer(times, xi)) - 1) / np.abs(xi)
    etas = [lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)]
    fx = np.ones((len(points),) + tuple(len(e) for e in etas), dtype=complex)
    for i, e in enumerate(etas):
        sh = [len(points)] + [1] * len(etas)
        sh[i + 1] = -1
        fx = fx * ((np.exp(1j * np.outer(points[:, i], e)) - 1) / np.abs(e)).reshape(sh)
    fx = fx.reshape(len(points), -1)
    streams = list(streams)
    out = np.empty((len(streams), len(times), len(points)))
    for i0 in range(0, len(streams), chunk):
        ids = streams[i0:i0 + chunk]
        z = np.stack([noise_coefficients(lattice, seed, s, n_level)[sl] for s in ids])
        c = (z * w).reshape(len(ids), len(xi), -1)
        out[i0:i0 + len(ids)] = np.einsum("tx,bxe,pe->btp", ft, c, fx, optimize=True).real
    return out


# ---------------------------------------------------------------------------
# second moments


def lattice_covariance(hurst: HurstVector, lattice: FrequencyLattice, n_level: int, s: float, t: float, y, y2,
                       *, m_level: int = None, kind: str = "cross", truncation: str = "ball") -> float:
    """Exact second moment of the *sampled* field (no Monte Carlo).

    kind='cross': E[X(t, y) X(s, y2)]; kind='increment': E[(X(t,y)-X(s,y))(X(t,y2)-X(s,y2))],
    with X = Psi_m - Psi_n when ``m_level`` is given, else X = Psi_n.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    top = n_level if m_level is None else m_level
    sl = tuple(lattice.axis_slice(ax, top) for ax in range(lattice.dim))
    mask = level_mask(lattice, top, truncation)[sl]
    if m_level is not None:
        mask = mask & ~level_mask(lattice, n_level, truncation)[sl]
    w = np.abs(psi_weights(hurst, lattice)[sl]) ** 2 * mask
    xi = lattice.centers(0)[sl[0]]
    etas = np.meshgrid(*[lattice.centers(ax)[sl[ax]] for ax in range(1, lattice.dim)], indexing="ij")
    r = np.sqrt(sum(e ** 2 for e in etas))
    ph = np.exp(1j * sum(e * (y[i] - y2[i]) for i, e in enumerate(etas)))
    xi_b = xi.reshape((-1,) + (1,) * (lattice.dim - 1))
    if kind == "cross":
        f = gamma_closed(t, xi_b, r[None]) * np.conj(gamma_closed(s, xi_b, r[None]))
    elif kind == "increment":
        lo, hi = min(s, t), max(s, t)
        f = np.abs(gamma_increment(lo, hi, xi_b, r[None])) ** 2
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return float(np.sum(w * f * ph[None]).real)


def _angular_rule(hurst, nodes, width):
    """theta nodes/weights on [0, pi/2] for |cos|^{a1} |sin|^{a2} (d = 2)."""
    a1 = 1.0 - 2.0 * hurst.h[1]
    a2 = 1.0 - 2.0 * hurst.h[2]
    edges = _quad.panel_edges(0.0, math.pi / 4, width)
    u, wu, _ = _quad.weighted_rule(edges, a2, nodes)
    # near theta = 0: |sin|^{a2} = u^{a2} (sin u / u)^{a2}
    th1 = u
    w1 = wu * (np.sinc(u / np.pi)) ** a2 * np.cos(u) ** a1
    v, wv, _ = _quad.weighted_rule(edges, a1, nodes)
    th2 = math.pi / 2 - v
    w2 = wv * (np.sinc(v / np.pi)) ** a1 * np.cos(v) ** a2
    return np.concatenate([th1, th2]), np.concatenate([w1, w2])


def angular_factor(hurst: HurstVector, rho, z, nodes=10):
    """int over S^{d-1} prod |omega_i|^{1-2H_i} e^{i rho <omega, z>} d omega, for d in {1, 2}."""
    rho = np.asarray(rho, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if hurst.d == 1:
        return 2.0 * np.cos(rho * z[0])
    if hurst.d != 2:
        raise DimensionUnsupported("angular factor implemented for d <= 2")
    zn = float(np.hypot(*z))
    width = min(math.pi / 4, 1.0 / max(zn * float(np.max(rho, initial=0.0)), 1e-300))
    th, w = _angular_rule(hurst, nodes, width)
    c, s = np.cos(th), np.sin(th)
    arg1 = rho[..., None] * (z[0] * c + z[1] * s)
    arg2 = rho[..., None] * (z[0] * c - z[1] * s)
    return 2.0 * ((np.cos(arg1) + np.cos(arg2)) @ w)


def _rect_integral(hurst, kernel, z, rlo, rhi, xlo, xhi, width, nodes, chunk=256):
    d = hurst.d
    beta_r = 2 * d - 1 - 2 * hurst.spatial_total
    beta_x = 1 - 2 * hurst.h[0]
    brk = [2.0 ** k for k in range(-8, 40)]
    er = _quad.panel_edges(rlo, rhi, width, brk)
    ex = _quad.panel_edges(xlo, xhi, width, brk)
    xr, wr, _ = _quad.weighted_rule(er, beta_r, nodes)
    xx, wx, _ = _quad.weighted_rule(ex, beta_x, nodes)
    ang = angular_factor(hurst, xr, z)
    total = 0.0
    for i in range(0, xr.size, chunk):
        r = xr[i:i + chunk, None]
        k = kernel(xx[None, :], r) @ wx
        total += float(np.sum(wr[i:i + chunk] * ang[i:i + chunk] * k))
    return 2.0 * total


def covariance_oracle(hurst: HurstVector, n_level, m_level: int, s: float, t: float, y, y2, tol: float = 1e-8,
                      *, kind: str = "increment", max_refine: int = 4) -> float:
    """Deterministic quadrature of the second moment of Psi_m - Psi_n (Psi_m if n_level is None).

    kind='increment' integrates |gamma_{s,t}|^2 e^{i<eta, y - y2>} (the
    increment covariance); kind='cross' integrates gamma_t conj(gamma_s)
    e^{i<eta, y - y2>}, i.e. E[X(t, y) X(s, y2)].  The truncation domain is
    |xi| <= 2^m, |eta| <= 2^m (Euclidean) minus the same at level n.
    """
    if hurst.d > 2:
        raise DimensionUnsupported("covariance oracle supports d <= 2")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    z = y - y2
    if kind == "increment":
        lo, hi = min(s, t), max(s, t)
        if lo == hi:
            return 0.0

        def kernel(xi, r):
            return np.abs(gamma_increment(lo, hi, xi, r)) ** 2
    elif kind == "cross":
        if s == 0 or t == 0:
            return 0.0

        def kernel(xi, r):
            return (gamma_closed(t, xi, r) * np.conj(gamma_closed(s, xi, r))).real
    else:
        raise ValueError(f"unknown kind {kind!r}")
    M = 2.0 ** m_level
    if n_level is None:
        rects = [(0.0, M, 0.0, M)]
    else:
        N = 2.0 ** n_level
        if n_level > m_level:
            raise ValueError("need n_level <= m_level")
        if n_level == m_level:
            return 0.0
        rects = [(0.0, N, N, M), (N, M, 0.0, M)]
    scale = max(abs(s), abs(t), float(np.linalg.norm(z)), 1.0)
    width = 1.0 / scale
    err = math.inf
    for _ in range(max_refine + 1):
        lo_v = sum(_rect_integral(hurst, kernel, z, *rc, width, 6) for rc in rects)
        hi_v = sum(_rect_integral(hurst, kernel, z, *rc, width, 10) for rc in rects)
        err = abs(hi_v - lo_v)
        if err < tol:
            return float(hi_v)
        width /= 2
    raise ToleranceNotReached(f"covariance quadrature error {err:.3g} > tol {tol:.3g}")
