"""Periodic spectral wave solver, the fixed-point map and Picard iteration.

The remainder v = u - Psi solves

    d_t^2 v - Lap v + rho^2 (v^2 + v Pi1 + Pi2) = 0,   (v, d_t v)(0) = (phi0, phi1)

whose mild form is v = Gamma(v) := W(t)(phi0, phi1) - G * [rho^2 (v^2 + Pi1 v + Pi2)].
The torus [-L, L)^d stands in for R^d; with L >= L_D + T + 1 finite speed
keeps wrap-around images away from the cutoff's support.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import norms
from .admiss import Kind, check_admissible, construct_pairs
from .errors import DimensionUnsupported, GridMismatch, MaxIterExceeded, NoContraction, RegimeMismatch
from .field import FieldKind, GridSpec, SpaceTimeField, sample_psi_n
from .lattice import FrequencyLattice, HurstVector, Regime, build_lattice


class Mode(enum.Enum):
    REGULAR = "REGULAR"
    WICK = "WICK"


@dataclass
class InitialData:
    phi0: np.ndarray
    phi1: np.ndarray
    grid: GridSpec
    s: float = 0.5

    def __post_init__(self):
        self.phi0 = np.asarray(self.phi0, dtype=float)
        self.phi1 = np.asarray(self.phi1, dtype=float)
        if self.phi0.shape != self.grid.shape or self.phi1.shape != self.grid.shape:
            raise GridMismatch("initial data do not match the grid")

    @classmethod
    def zero(cls, grid: GridSpec, s: float = 0.5):
        return cls(np.zeros(grid.shape), np.zeros(grid.shape), grid, s)

    def norms(self):
        return (norms.sobolev_norm(self.phi0, self.grid, self.s, 2.0),
                norms.sobolev_norm(self.phi1, self.grid, self.s - 1, 2.0))


@dataclass
class PiPair:
    pi1: np.ndarray  # (T, grid)
    pi2: np.ndarray
    alpha: float = 0.0
    norm_p: int = 2


@dataclass
class CutoffRho:
    values: np.ndarray
    radius: float
    amplitude: float = 1.0

    @classmethod
    def bump(cls, grid: GridSpec, radius: float, amplitude: float = 1.0):
        """amplitude * exp(1 - 1/(1 - |x|^2/R^2)) inside |x| < R, else 0."""
        r2 = grid.radius() ** 2 / radius ** 2
        vals = np.zeros(grid.shape)
        inside = r2 < 1
        vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return cls(vals, radius, amplitude)

    @classmethod
    def zero(cls, grid: GridSpec):
        return cls(np.zeros(grid.shape), 0.0, 0.0)


# ---------------------------------------------------------------------------
# linear pieces


def _fft(values, d):
    return np.fft.fftn(values, axes=tuple(range(-d, 0)))


def _ifft(values, d):
    return np.fft.ifftn(values, axes=tuple(range(-d, 0))).real


def propagate_linear(data: InitialData, times):
    """Free wave evolution of (phi0, phi1), exact per torus mode; returns (w, d_t w)."""
    grid = data.grid
    times = np.asarray(times, dtype=float)
    k = grid.abs_wavenumber()
    p0 = _fft(data.phi0, grid.dim)
    p1 = _fft(data.phi1, grid.dim)
    tt = times.reshape((-1,) + (1,) * grid.dim)
    c = np.cos(tt * k)
    sk = tt * np.sinc(tt * k / np.pi)  # sin(t k)/k, equal to t at k = 0
    w = c * p0 + sk * p1
    wt = -(k * k) * sk * p0 + c * p1
    return _ifft(w, grid.dim), _ifft(wt, grid.dim)


def _one_minus_cos_over_sq(x):
    return 0.5 * np.sinc(x / (2 * np.pi)) ** 2


def _x_minus_sin_over_cube(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs = x[small] ** 2
    out[small] = 1 / 6 - xs / 120 + xs * xs / 5040 - xs ** 3 / 362880
    xl = x[~small]
    out[~small] = (xl - np.sin(xl)) / xl ** 3
    return out


def duhamel(source, times, grid: GridSpec, *, with_velocity: bool = False):
    """w(t) = int_0^t sin((t - s)|k|)/|k| f(s) ds per mode, f linear between time nodes.

    Each step integrates the piecewise-linear source against the kernel
    exactly (Filon-type), so the scheme is second order in the time step
    for any wave number.  ``times`` must be uniform.
    """
    times = np.asarray(times, dtype=float)
    source = np.asarray(source, dtype=float)
    if source.shape != (times.size,) + grid.shape:
        raise GridMismatch("source does not match times x grid")
    if times.size > 2 and not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=1e-14):
        raise ValueError("duhamel needs a uniform time grid")
    d = grid.dim
    fh = _fft(source, d)
    out = np.zeros(fh.shape, dtype=complex)
    vel = np.zeros(fh.shape, dtype=complex) if with_velocity else None
    if times.size < 2:
        return (_ifft(out, d), _ifft(vel, d)) if with_velocity else _ifft(out, d)
    h = times[1] - times[0]
    k = grid.abs_wavenumber()
    x = k * h
    c, sn = np.cos(x), np.sin(x)
    sk = h * np.sinc(x / np.pi)  # sin(kh)/k
    p0 = h * h * _one_minus_cos_over_sq(x)
    p1 = h ** 3 * _x_minus_sin_over_cube(x)
    q0 = sk
    q1 = p0
    w = np.zeros(grid.shape, dtype=complex)
    wt = np.zeros(grid.shape, dtype=complex)
    for j in range(times.size - 1):
        f0, f1 = fh[j], fh[j + 1]
        slope = (f1 - f0) / h
        w, wt = (c * w + sk * wt + p0 * f0 + p1 * slope,
                 -k * sn * w + c * wt + q0 * f0 + q1 * slope)
        out[j + 1] = w
        if with_velocity:
            vel[j + 1] = wt
    if with_velocity:
        return _ifft(out, d), _ifft(vel, d)
    return _ifft(out, d)


def nonlinearity(v, pi: PiPair, rho: CutoffRho):
    rv = rho.values * v
    return rv * rv + (rho.values * pi.pi1) * rv + rho.values ** 2 * pi.pi2


def gamma_map(v: np.ndarray, data: InitialData, pi: PiPair, rho: CutoffRho, times, *, linear=None) -> np.ndarray:
    """Gamma(v) = free evolution of the data - Duhamel[rho^2 (v^2 + Pi1 v + Pi2)]."""
    times = np.asarray(times, dtype=float)
    shape = (times.size,) + data.grid.shape
    v = np.asarray(v, dtype=float)
    if v.shape != shape or pi.pi1.shape != shape or pi.pi2.shape != shape or rho.values.shape != data.grid.shape:
        raise GridMismatch("v, Pi and rho must share the time x space grid")
    if linear is None:
        linear = propagate_linear(data, times)[0]
    if not np.any(rho.values):
        return linear.copy()
    return linear - duhamel(nonlinearity(v, pi, rho), times, data.grid)


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardTrace:
    norms: list = field(default_factory=list)
    differences: list = field(default_factory=list)
    contraction: list = field(default_factory=list)
    T: float = None
    converged: bool = False
    iterations: int = 0
    residual: float = None
    uniqueness_gap: float = None
    horizons_tried: list = field(default_factory=list)

    def as_dict(self):
        return {k: getattr(self, k) for k in ("norms", "differences", "contraction", "T", "converged", "iterations",
                                              "residual", "uniqueness_gap", "horizons_tried")}


def _xs(values, times, grid, s, q, r):
    f = SpaceTimeField(times, grid, values, {})
    return norms.x_s_norm(f, s, q, r)


def _iterate(v, data, pi, rho, times, s, q, r, tol, max_iter, linear):
    """Picard loop on a fixed horizon; returns (v, trace, status)."""
    tr = PicardTrace(T=float(times[-1]))
    prev = None
    rising = 0
    for it in range(1, max_iter + 1):
        nv = gamma_map(v, data, pi, rho, times, linear=linear)
        if not np.all(np.isfinite(nv)):
            return v, tr, "diverged"
        diff = _xs(nv - v, times, data.grid, s, q, r)
        tr.norms.append(_xs(nv, times, data.grid, s, q, r))
        tr.differences.append(diff)
        if prev is not None and prev > 0:
            tr.contraction.append(diff / prev)
            rising = rising + 1 if diff >= prev else 0
        v = nv
        tr.iterations = it
        if diff < tol:
            tr.converged = True
            return v, tr, "converged"
        if rising >= 2 or (tr.norms[0] > 0 and tr.norms[-1] > 1e8 * max(tr.norms[0], 1.0)):
            return v, tr, "diverged"
        prev = diff
    return v, tr, "max_iter"


def picard_solve(data: InitialData, pi: PiPair, rho: CutoffRho, s, q, r, times, tol: float = 1e-8,
                 max_iter: int = 64, *, min_fraction: int = 64, v0=None, probe_uniqueness: bool = True):
    """Fixed point of Gamma on [0, T0], halving T from times[-1] while iterates do not contract.

    Returns (v, trace) with v a SpaceTimeField on the time nodes <= T0.
    """
    res = check_admissible(q, r, data.grid.dim, Fraction(s).limit_denominator(10 ** 6) if isinstance(s, float) else s,
                           Kind.ADMISSIBLE)
    if not res.ok:
        from .errors import NotAdmissible

        raise NotAdmissible(f"({q}, {r}) violates {res.violations}")
    times = np.asarray(times, dtype=float)
    s_f = float(s)
    n_steps = times.size - 1
    horizons = []
    steps = n_steps
    last = None
    while steps >= max(1, n_steps // min_fraction):
        tt = times[: steps + 1]
        sub = PiPair(pi.pi1[: steps + 1], pi.pi2[: steps + 1], pi.alpha, pi.norm_p)
        linear = propagate_linear(data, tt)[0]
        start = linear.copy() if v0 is None else np.asarray(v0, dtype=float)[: steps + 1]
        v, tr, status = _iterate(start, data, sub, rho, tt, s_f, q, r, tol, max_iter, linear)
        horizons.append(float(tt[-1]))
        last = tr
        if status == "converged":
            nv = gamma_map(v, data, sub, rho, tt, linear=linear)
            tr.residual = _xs(nv - v, tt, data.grid, s_f, q, r)
            if probe_uniqueness:
                v2, tr2, st2 = _iterate(np.zeros_like(v), data, sub, rho, tt, s_f, q, r, tol, max_iter, linear)
                tr.uniqueness_gap = _xs(v2 - v, tt, data.grid, s_f, q, r) if st2 == "converged" else math.inf
            tr.horizons_tried = horizons
            meta = {"kind": FieldKind.SOLUTION_V, "T0": float(tt[-1])}
            return SpaceTimeField(tt, data.grid, v, meta), tr
        if status == "max_iter" and tr.contraction and max(tr.contraction[-3:]) < 1:
            tr.horizons_tried = horizons
            raise MaxIterExceeded(f"contracting but not within tol after {max_iter} iterations at T={tt[-1]:.4g}")
        steps //= 2
    raise NoContraction(f"no contraction down to T={horizons[-1]:.4g} (tried {horizons}); last trace {last.differences[-3:]}")


# ---------------------------------------------------------------------------
# pipelines


@dataclass
class SolveResult:
    u: SpaceTimeField
    v: SpaceTimeField
    psi: SpaceTimeField
    pi: PiPair
    trace: PicardTrace
    q: Fraction
    r: Fraction
    sigma: np.ndarray = None


def default_lattice(n_level: int, d: int) -> FrequencyLattice:
    return build_lattice(n_level, 4, d + 1, low_octaves=4, max_width=(0.5,) + (None,) * d)


def solve_full(hurst: HurstVector, n_level: int, data: InitialData, rho: CutoffRho, times, seed: int,
               mode: Mode, *, lattice: FrequencyLattice = None, stream_index: int = 0, s=Fraction(1, 2),
               tol: float = 1e-8, max_iter: int = 64, renormalize: bool = True, sigma=None,
               probe_uniqueness: bool = True, min_fraction: int = 64, q=None, r=None) -> SolveResult:
    """u = Psi_n + v with v the Picard fixed point for Pi = (2 Psi_n, Psi_n^2 or its Wick square).

    ``sigma`` overrides the renormalization constants (array over ``times``
    or callable); by default they come from a spline through quadrature
    values of sigma_n(t).  ``renormalize=False`` in WICK mode is the
    deliberate ablation Pi2 = Psi_n^2.  (q, r) default to the explicit pair
    of ``construct_pairs(d, s)``; explicit values are checked exactly.
    """
    mode = Mode(mode)
    regime = hurst.regime
    if (mode is Mode.REGULAR) != (regime is Regime.REGULAR) or regime is Regime.UNSUPPORTED:
        raise RegimeMismatch(f"mode {mode.value} does not match the {regime.value} regime of H={hurst.h}")
    d = hurst.d
    if not 2 <= d <= 4:
        raise DimensionUnsupported("the nonlinear pipeline needs 2 <= d <= 4")
    if data.grid.dim != d:
        raise GridMismatch("data grid dimension differs from d")
    times = np.asarray(times, dtype=float)
    lattice = lattice or default_lattice(n_level, d)
    psi = sample_psi_n(hurst, n_level, lattice, data.grid, times, seed, stream_index)
    pi1 = 2.0 * psi.values
    sig = None
    if mode is Mode.WICK and renormalize:
        from .renorm import SigmaInterpolant

        if sigma is None:
            sigma = SigmaInterpolant(hurst, n_level, float(times[-1]))
        sig = np.asarray(sigma(times) if callable(sigma) else sigma, dtype=float)
        pi2 = psi.values ** 2 - sig.reshape((-1,) + (1,) * d)
    else:
        pi2 = psi.values ** 2
    if q is None or r is None:
        pair = construct_pairs(d, s).admissible
        q, r = pair.q, pair.r
    pi = PiPair(pi1, pi2, 0.0)
    v, tr = picard_solve(data, pi, rho, s, q, r, times, tol, max_iter,
                         probe_uniqueness=probe_uniqueness, min_fraction=min_fraction)
    nT = v.times.size
    u = SpaceTimeField(v.times, data.grid, psi.values[:nT] + v.values,
                       dict(psi.meta, kind=FieldKind.SOLUTION_U, T0=v.meta["T0"], mode=mode.value))
    return SolveResult(u, v, psi, pi, tr, q, r, sig)


@dataclass
class ConvergenceReport:
    levels: list
    T0: float
    differences: list
    norm: str
    passed: bool
    inversions: int
    traces: dict = field(default_factory=dict)

    def as_dict(self):
        return {"levels": self.levels, "T0": self.T0, "differences": self.differences, "norm": self.norm,
                "passed": self.passed, "inversions": self.inversions}


def count_inversions(seq) -> int:
    return int(sum(1 for a, b in zip(seq[:-1], seq[1:]) if b >= a))


def decreasing_with_one_inversion(seq, min_levels: int = 4) -> bool:
    return len(seq) + 1 >= min_levels and count_inversions(seq) <= 1


def convergence_study(hurst: HurstVector, n_levels, seed: int, data: InitialData, rho: CutoffRho, times,
                      mode: Mode, *, alpha: float = 0.1, domain_half_width: float = None, tol: float = 1e-8,
                      max_iter: int = 64, sigma_factory=None, lattice: FrequencyLattice = None,
                      **kw) -> ConvergenceReport:
    """Solve at every level with the same draws and compare consecutive levels.

    REGULAR: differences in L^inf([0, T0]; L^2(D)); WICK: in L^inf([0, T0]; W^{-alpha,2}(D)),
    T0 the smallest horizon found over the levels.
    """
    mode = Mode(mode)
    levels = [int(n) for n in n_levels]
    top = max(levels)
    lattice = lattice or default_lattice(top, hurst.d)
    sols = {}
    for n in dict.fromkeys(levels):
        sig = sigma_factory(n) if sigma_factory else None
        sols[n] = solve_full(hurst, n, data, rho, times, seed, mode, lattice=lattice, tol=tol, max_iter=max_iter,
                             sigma=sig, **kw)
    T0 = min(s.u.times[-1] for s in sols.values())
    nT = int(np.searchsorted(times, T0 + 1e-12))
    grid = data.grid
    L_D = domain_half_width if domain_half_width is not None else rho.radius
    mask = grid.box_mask(L_D)
    order = 0.0 if mode is Mode.REGULAR else -alpha
    diffs = []
    for a, b in zip(levels[:-1], levels[1:]):
        du = sols[b].u.values[:nT] - sols[a].u.values[:nT]
        per_t = norms.sobolev_norm(du, grid, order, 2.0, mask)
        diffs.append(float(np.max(per_t)))
    name = "Linf_L2_D" if mode is Mode.REGULAR else f"Linf_W-{alpha:g},2_D"
    inv = count_inversions(diffs)
    return ConvergenceReport(levels, float(T0), diffs, name, decreasing_with_one_inversion(diffs), inv,
                             {n: s.trace for n, s in sols.items()})


@dataclass
class AblationReport:
    levels: list
    T: float
    first_norms: list
    final_norms: list
    statuses: list
    renormalized_first_norms: list
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def renormalization_ablation(hurst: HurstVector, n_levels, seed: int, data: InitialData, rho: CutoffRho, times, *,
                             iterations: int = 6, s=Fraction(1, 2), lattice_factory=None) -> AblationReport:
    """Picard iterates with Pi2 = Psi_n^2 (no sigma subtraction) on the full horizon.

    Records the X^s norm of the first iterate Gamma(linear) and of the last of
    ``iterations`` iterates per level, next to the first-iterate norm with the
    Wick square for comparison.  PASS iff the unrenormalized first-iterate
    norms increase strictly with n.
    """
    from .renorm import SigmaInterpolant

    times = np.asarray(times, dtype=float)
    levels = [int(n) for n in n_levels]
    pair = construct_pairs(hurst.d, s).admissible
    linear = propagate_linear(data, times)[0]
    first, final, status, ren = [], [], [], []
    for n in levels:
        lat = lattice_factory(n) if lattice_factory else default_lattice(n, hurst.d)
        psi = sample_psi_n(hurst, n, lat, data.grid, times, seed, 0).values
        sig = SigmaInterpolant(hurst, n, float(times[-1]))(times).reshape((-1,) + (1,) * hurst.d)
        for pi2, sink in ((psi ** 2, None), (psi ** 2 - sig, ren)):
            pi = PiPair(2.0 * psi, pi2, 0.0)
            if sink is None:
                _, tr, st = _iterate(linear.copy(), data, pi, rho, times, float(s), pair.q, pair.r, 0.0, iterations,
                                     linear)
                first.append(tr.norms[0] if tr.norms else math.inf)
                final.append(tr.norms[-1] if tr.norms and st != "diverged" else math.inf)
                status.append(st)
            else:
                nv = gamma_map(linear, data, pi, rho, times, linear=linear)
                sink.append(_xs(nv, times, data.grid, float(s), pair.q, pair.r))
    ok = all(b > a for a, b in zip(first[:-1], first[1:]))
    return AblationReport(levels, float(times[-1]), first, final, status, ren, ok)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass
class Manufactured:
    data: InitialData
    pi: PiPair
    rho: CutoffRho
    v_star: np.ndarray
    times: np.ndarray


def _laplacian(values, grid):
    k2 = grid.abs_wavenumber() ** 2
    axes = tuple(range(-grid.dim, 0))
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * -k2[..., : grid.points // 2 + 1], s=grid.shape, axes=axes)


def manufactured_problem(grid: GridSpec, times, *, amplitude: float = 0.3, rho_radius: float = 1.2,
                         data_amplitude: float = 0.2, pi1_amplitude: float = 0.3) -> Manufactured:
    """Inputs for which v* = w + b(t) m(x) solves v = Gamma(v) exactly.

    w is the linear evolution of Gaussian data, m = rho^4 h with h Gaussian
    and b(t) = amplitude t^2 (so the correction starts at rest).  With
    z = b m the equation z'' - Lap z = -rho^2 (v*^2 + v* Pi1 + Pi2) fixes
    Pi2 = -(z'' - Lap z) / rho^2 - v*^2 - v* Pi1 where rho > 0, and 0 where
    rho vanishes (there z vanishes and its spectral Laplacian is below 1e-6;
    the fourth power keeps that ringing small).
    """
    times = np.asarray(times, dtype=float)
    x = grid.mesh()
    r2 = sum(c ** 2 for c in x)
    gauss = np.exp(-r2 / (2 * 0.25 ** 2))
    data = InitialData(data_amplitude * gauss, -0.5 * data_amplitude * gauss, grid)
    rho = CutoffRho.bump(grid, rho_radius, 1.0)
    w = propagate_linear(data, times)[0]
    m = rho.values ** 4 * np.exp(-r2 / (2 * 0.3 ** 2))
    lap_m = _laplacian(m, grid)
    tt = times.reshape((-1,) + (1,) * grid.dim)
    z = amplitude * tt ** 2 * m
    box_z = amplitude * (2.0 * m - tt ** 2 * lap_m)
    v_star = w + z
    pi1 = pi1_amplitude * np.cos(2.0 * tt) * np.exp(-r2 / (2 * 0.4 ** 2))
    rho2 = rho.values ** 2
    safe = rho2 > 1e-150
    pi2 = np.where(safe, -box_z / np.where(safe, rho2, 1.0) - v_star ** 2 - v_star * pi1, 0.0)
    return Manufactured(data, PiPair(pi1, pi2, 0.0), rho, v_star, times)
