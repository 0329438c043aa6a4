"""Renormalization constant sigma_n(t) = E[Psi_n(t, x)^2], Wick squares and checks.

sigma_n(t) is computed from its radial form

    sigma_n(t) = Omega(H) int_0^{2^n} dr r^{2d-1-2(H_1+..+H_d)}
                 int_{|xi| <= 2^n} dxi |xi|^{1-2H_0} |gamma_t(xi, r)|^2

where Omega(H) is the exact angular integral of prod |omega_i|^{1-2H_i} over
the unit sphere.  With that constant the quadrature matches the variance of
the sampled field, not just its growth rate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from . import _quad
from .errors import InsufficientData, LevelMismatch, TimeGridMismatch, ToleranceNotReached
from .field import FieldKind, SpaceTimeField, psi_at_points
from .gamma import gamma_abs2
from .lattice import FrequencyLattice, HurstVector, build_lattice


def angular_constant(hurst: HurstVector) -> float:
    """int over S^{d-1} of prod |omega_i|^{1-2H_i}: 2 prod Gamma(1-H_i) / Gamma(sum(1-H_i))."""
    a = [1.0 - h for h in hurst.h[1:]]
    return 2.0 * math.exp(sum(gammaln(v) for v in a) - gammaln(sum(a)))


@dataclass
class SigmaCurve:
    hurst: HurstVector
    t_values: np.ndarray
    n_values: np.ndarray
    sigma: np.ndarray  # shape (len(n_values), len(t_values))
    quadrature_tol: float
    error: np.ndarray = None

    def at(self, n_level: int) -> np.ndarray:
        idx = np.nonzero(self.n_values == n_level)[0]
        if idx.size == 0:
            raise LevelMismatch(f"level {n_level} not in curve")
        return self.sigma[idx[0]]

    def rows(self):
        for i, n in enumerate(self.n_values):
            for j, t in enumerate(self.t_values):
                yield int(n), float(t), float(self.sigma[i, j]), float(self.quadrature_tol)


def _sigma_all_levels(hurst, levels, t, nodes, width, chunk=256):
    d = hurst.d
    top = 2.0 ** max(levels)
    cut = [2.0 ** n for n in levels]
    brk = [2.0 ** k for k in range(-8, max(levels) + 1)]
    edges = _quad.panel_edges(0.0, top, width, brk)
    beta_r = 2 * d - 1 - 2 * hurst.spatial_total
    beta_xi = 1 - 2 * hurst.h[0]
    xr, wr, _ = _quad.weighted_rule(edges, beta_r, nodes)
    xx, wx, _ = _quad.weighted_rule(edges, beta_xi, nodes)
    wx_lev = _quad.prefix_weights(xx, wx, cut)
    wr_lev = _quad.prefix_weights(xr, wr, cut)
    acc = np.zeros(len(levels))
    for i in range(0, xr.size, chunk):
        r = xr[i:i + chunk, None]
        inner = gamma_abs2(t, xx[None, :], r) @ wx_lev  # (chunk, levels)
        acc += np.einsum("il,il->l", inner, wr_lev[i:i + chunk])
    return 2.0 * angular_constant(hurst) * acc


def sigma_levels(hurst: HurstVector, levels, t: float, tol: float = 1e-6, *, max_refine: int = 3):
    """sigma_n(t) for all n in ``levels`` at once, with relative error estimate.

    Two composite rules (6 and 10 nodes per panel, panels no wider than
    min(1, 1/t) with edges at powers of two) are compared; on disagreement
    above ``tol`` the panels are halved.
    """
    levels = [int(n) for n in levels]
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.zeros(len(levels)), np.zeros(len(levels))
    width = min(1.0, 1.0 / t)
    for _ in range(max_refine + 1):
        lo = _sigma_all_levels(hurst, levels, t, 6, width)
        hi = _sigma_all_levels(hurst, levels, t, 10, width)
        err = np.abs(hi - lo)
        if np.all(err <= tol * np.abs(hi)):
            return hi, err
        width /= 2
    raise ToleranceNotReached(f"sigma quadrature relative error {np.max(err / np.abs(hi)):.3g} > {tol:.3g}")


def sigma_quadrature(hurst: HurstVector, n_level: int, t: float, tol: float = 1e-6) -> float:
    """sigma_n(t) by tensor Gauss quadrature in (r, xi); relative error < tol."""
    val, _ = sigma_levels(hurst, [n_level], t, tol)
    return float(val[0])


def sigma_curve(hurst: HurstVector, n_values, t_values, tol: float = 1e-6) -> SigmaCurve:
    n_values = np.asarray(sorted(int(n) for n in n_values))
    t_values = np.asarray(t_values, dtype=float)
    sig = np.zeros((n_values.size, t_values.size))
    err = np.zeros_like(sig)
    for j, t in enumerate(t_values):
        sig[:, j], err[:, j] = sigma_levels(hurst, n_values, float(t), tol)
    return SigmaCurve(hurst, t_values, n_values, sig, tol, err)


class GrowthRegime(enum.Enum):
    GEOMETRIC = "GEOMETRIC"
    LINEAR = "LINEAR"


@dataclass
class SigmaFit:
    regime: GrowthRegime
    fitted_rate: float
    fitted_c: float
    linear_in_t_residual: float
    expected_rate: float = None
    per_t_rate: list = field(default_factory=list)
    increments_spread: float = None

    def as_dict(self):
        return {
            "regime": self.regime.value,
            "fitted_rate": self.fitted_rate,
            "fitted_c": self.fitted_c,
            "linear_in_t_residual": self.linear_in_t_residual,
            "expected_rate": self.expected_rate,
            "per_t_rate": list(self.per_t_rate),
            "increments_spread": self.increments_spread,
        }


def _fit_geometric(n, y):
    """Least squares y ~ A 2^(k n) + B: profile over k, linear in (A, B)."""

    def resid(k):
        X = np.column_stack([2.0 ** (k * n), np.ones_like(n)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return np.sum((X @ coef - y) ** 2), coef

    from scipy.optimize import minimize_scalar

    grid = np.concatenate([np.linspace(-4.0, -0.01, 400), np.linspace(0.01, 4.0, 400)])
    k0 = grid[np.argmin([resid(k)[0] for k in grid])]
    bounds = (max(1e-3, k0 - 0.02), k0 + 0.02) if k0 > 0 else (k0 - 0.02, min(-1e-3, k0 + 0.02))
    res = minimize_scalar(lambda k: resid(k)[0], bounds=bounds, method="bounded", options={"xatol": 1e-10})
    k = float(res.x)
    return k, resid(k)[1]


def _fit_through_origin(t, a):
    c = float(np.dot(t, a) / np.dot(t, t))
    resid = float(np.linalg.norm(a - c * t) / np.linalg.norm(a))
    return c, resid


def sigma_asymptotic_fit(curve: SigmaCurve, *, border_tol: float = 1e-9) -> SigmaFit:
    """Fit sigma_n(t) ~ A(t) 2^(kappa n) + B(t) (kappa != 0) or A(t) n + B(t) (kappa = 0).

    For kappa < 0 (regular regime) the same form describes the convergence
    of sigma_n to its limit B(t), with A(t) < 0.

    The leading coefficient A(t) is then fitted by c t; the relative residual
    of that fit is reported as ``linear_in_t_residual``.  The reported rate is
    the exponent fitted jointly over all positive t (per-t rates are kept too).
    """
    n = curve.n_values.astype(float)
    tmask = curve.t_values > 0
    if n.size < 4 or np.count_nonzero(tmask) < 3:
        raise InsufficientData("need >= 4 levels and >= 3 positive times")
    ts = curve.t_values[tmask]
    sig = curve.sigma[:, tmask]
    kappa = curve.hurst.kappa
    if abs(kappa) <= border_tol:
        lead = []
        for j in range(ts.size):
            A, B = np.polyfit(n, sig[:, j], 1)
            lead.append(A)
        lead = np.array(lead)
        c, res = _fit_through_origin(ts, lead)
        inc = np.diff(sig, axis=0)
        spread = float(np.max(np.abs(inc / inc.mean(axis=0) - 1.0)))
        return SigmaFit(GrowthRegime.LINEAR, 0.0, c, res, 0.0, [0.0] * ts.size, spread)
    rates, lead = [], []
    for j in range(ts.size):
        k, (A, B) = _fit_geometric(n, sig[:, j])
        rates.append(k)
    # joint rate: shared exponent, per-t amplitudes and offsets
    from scipy.optimize import minimize_scalar

    def joint(k):
        tot = 0.0
        for j in range(ts.size):
            X = np.column_stack([2.0 ** (k * n), np.ones_like(n)])
            coef, *_ = np.linalg.lstsq(X, sig[:, j], rcond=None)
            tot += np.sum(((X @ coef) - sig[:, j]) ** 2) / np.sum(sig[:, j] ** 2)
        return tot

    lo, hi = min(rates) - 0.05, max(rates) + 0.05
    bounds = (max(lo, 1e-3), hi) if kappa > 0 else (lo, min(hi, -1e-3))
    k = float(minimize_scalar(joint, bounds=bounds, method="bounded", options={"xatol": 1e-10}).x)
    for j in range(ts.size):
        X = np.column_stack([2.0 ** (k * n), np.ones_like(n)])
        coef, *_ = np.linalg.lstsq(X, sig[:, j], rcond=None)
        lead.append(coef[0])
    c, res = _fit_through_origin(ts, np.array(lead))
    return SigmaFit(GrowthRegime.GEOMETRIC, k, c, res, kappa, rates)


class SigmaInterpolant:
    """sigma_n(t) on [0, T] by a cubic spline of log sigma against log t.

    Knots: uniform with spacing at most 2^-(n+1) (and at least 16 intervals)
    plus 8 geometric knots down to T/1000.  Below the first knot sigma is
    continued as c t^4, its small-t behavior.  Relative error is about 1e-3
    or better on the knot range.
    """

    def __init__(self, hurst: HurstVector, n_level: int, T: float, nodes: int = None, tol: float = 1e-8):
        self.hurst = hurst
        self.n_level = int(n_level)
        self.T = float(T)
        if nodes is None:
            nodes = max(16, int(math.ceil(2.0 * T * 2.0 ** n_level))) + 1
        uniform = np.linspace(0.0, T, nodes)[1:]
        knots = np.unique(np.concatenate([np.geomspace(T * 1e-3, uniform[0], 8), uniform]))
        vals = np.array([sigma_quadrature(hurst, n_level, float(t), tol) for t in knots])
        self.knots, self.values = knots, vals
        self._spline = CubicSpline(np.log(knots), np.log(vals))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        t0 = self.knots[0]
        inner = np.exp(self._spline(np.log(np.clip(t, t0, None))))
        out = np.where(t < t0, self.values[0] * (np.maximum(t, 0.0) / t0) ** 4, inner)
        return out[()] if out.ndim == 0 else out


def wick_square(psi: SpaceTimeField, sigma, *, n_level: int = None, times=None) -> SpaceTimeField:
    """Pointwise Psi_n^2 - sigma_n(t).

    ``sigma`` is an array with one value per time of ``psi``, a SigmaCurve
    (its row for ``psi``'s level; its t grid must equal the field's) or a
    callable of t.
    """
    if psi.meta.get("kind") not in (FieldKind.LINEAR_PSI, FieldKind.LINEAR_PSI.value):
        raise ValueError("wick_square needs a LINEAR_PSI field")
    lev = psi.meta.get("n_level")
    if isinstance(sigma, SigmaCurve):
        if lev not in set(int(v) for v in sigma.n_values):
            raise LevelMismatch(f"sigma curve lacks level {lev}")
        if sigma.t_values.shape != psi.times.shape or not np.allclose(sigma.t_values, psi.times, rtol=0, atol=1e-12):
            raise TimeGridMismatch("sigma curve times differ from the field's")
        values = sigma.at(lev)
    elif callable(sigma):
        if n_level is not None and n_level != lev:
            raise LevelMismatch(f"sigma for level {n_level}, field at level {lev}")
        if getattr(sigma, "n_level", lev) != lev:
            raise LevelMismatch(f"sigma for level {sigma.n_level}, field at level {lev}")
        values = np.asarray(sigma(psi.times), dtype=float)
    else:
        if n_level is not None and n_level != lev:
            raise LevelMismatch(f"sigma for level {n_level}, field at level {lev}")
        values = np.asarray(sigma, dtype=float)
        if times is not None and (len(times) != len(psi.times) or not np.allclose(times, psi.times)):
            raise TimeGridMismatch("sigma times differ from the field's")
        if values.shape != psi.times.shape:
            raise TimeGridMismatch("need one sigma value per field time")
    shape = (-1,) + (1,) * (psi.values.ndim - 1)
    out = psi.values ** 2 - values.reshape(shape)
    meta = dict(psi.meta, kind=FieldKind.WICK_PSI2)
    return SpaceTimeField(psi.times, psi.grid, out, meta)


# ---------------------------------------------------------------------------
# Monte Carlo checks of the Wick identities


@dataclass
class WickRow:
    point: tuple
    lhs: float
    rhs_mc: float
    rhs_oracle: float
    se: float
    z: float
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class WickReport:
    rows: list
    passed: bool
    realizations: int


def default_mc_lattice(top_level: int, d: int) -> FrequencyLattice:
    """Lattice used by the Monte Carlo checks: capped cells on the time axis, geometric in space."""
    widths = (0.5,) * (d + 1) if d == 1 else (0.5,) + (None,) * d
    return build_lattice(top_level, 4, d + 1, low_octaves=4, max_width=widths)


def wick_covariance_check(hurst: HurstVector, n: int, m: int, points, realizations: int, seed: int, *,
                          lattice: FrequencyLattice = None, sigma_tol: float = 1e-8, use_oracle: bool = True,
                          z_limit: float = 3.0) -> WickReport:
    """E[W_m(t, y) W_n(s, y2)] against 2 E[Psi_m(t, y) Psi_n(s, y2)]^2 with W_l = Psi_l^2 - sigma_l.

    ``points`` are tuples (t, y, s, y2).  Both sides are estimated from the
    same draws; the standard error of LHS - 2 Qbar^2 comes from the delta
    method (influence P - 4 Qbar Q).  The oracle value of the right-hand side
    (quadrature) is reported as well when d <= 2.
    """
    if n > m:
        n, m = m, n
    lattice = lattice or default_mc_lattice(m, hurst.d)
    pts = [(float(t), np.atleast_1d(np.asarray(y, float)), float(s), np.atleast_1d(np.asarray(y2, float)))
           for t, y, s, y2 in points]
    times = sorted({p[0] for p in pts} | {p[2] for p in pts})
    locs = []
    for p in pts:
        for loc in (p[1], p[3]):
            if not any(np.array_equal(loc, l) for l in locs):
                locs.append(loc)
    ti = {t: i for i, t in enumerate(times)}
    li = lambda y: next(i for i, l in enumerate(locs) if np.array_equal(l, y))  # noqa: E731
    fields = psi_at_points(hurst, lattice, sorted({n, m}), times, np.array(locs), seed, range(realizations))
    sig = {lev: {t: (sigma_quadrature(hurst, lev, t, sigma_tol) if t > 0 else 0.0) for t in times} for lev in {n, m}}
    rows = []
    for t, y, s, y2 in pts:
        a = fields[m][:, ti[t], li(y)]
        b = fields[n][:, ti[s], li(y2)]
        wa = a * a - sig[m][t]
        wb = b * b - sig[n][s]
        P = wa * wb
        Q = a * b
        qbar = Q.mean()
        diff = P.mean() - 2 * qbar ** 2
        infl = P - 4 * qbar * Q
        se = float(np.std(infl, ddof=1) / math.sqrt(realizations))
        z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
        orc = math.nan
        if use_oracle and hurst.d <= 2:
            from .field import covariance_oracle

            orc = 2 * covariance_oracle(hurst, None, n, s, t, y, y2, tol=1e-9, kind="cross") ** 2 if min(s, t) > 0 else 0.0
        rows.append(WickRow((t, tuple(y), s, tuple(y2)), float(P.mean()), float(2 * qbar ** 2), float(orc), se,
                            float(z), bool(abs(z) <= z_limit)))
    return WickReport(rows, all(r.passed for r in rows), realizations)


def square_variance_check(hurst: HurstVector, n: int, t: float, realizations: int, seed: int, *, y=None,
                          lattice: FrequencyLattice = None, z_limit: float = 3.0) -> dict:
    """Var[Psi_n(t, y)^2] (as the mean of the squared Wick square) against 2 sigma_n(t)^2,
    plus the Gaussian fourth-moment ratio E[Psi^4] / (3 sigma^2)."""
    lattice = lattice or default_mc_lattice(n, hurst.d)
    y = np.zeros(hurst.d) if y is None else np.atleast_1d(np.asarray(y, float))
    vals = psi_at_points(hurst, lattice, [n], [t], y[None, :], seed, range(realizations))[n][:, 0, 0]
    sig = sigma_quadrature(hurst, n, t)
    w2 = (vals * vals - sig) ** 2
    se = float(np.std(w2, ddof=1) / math.sqrt(realizations))
    z = (w2.mean() - 2 * sig ** 2) / se
    fourth = vals ** 4
    ratio = fourth.mean() / (3 * sig ** 2)
    ratio_se = float(np.std(fourth, ddof=1) / math.sqrt(realizations) / (3 * sig ** 2))
    mean_w = float(np.mean(vals * vals - sig))
    mean_se = float(np.std(vals * vals, ddof=1) / math.sqrt(realizations))
    return {"lhs": float(w2.mean()), "rhs": 2 * sig ** 2, "se": se, "z": float(z), "passed": bool(abs(z) <= z_limit),
            "sigma": sig, "sample_var": float(np.var(vals, ddof=1)), "fourth_ratio": float(ratio),
            "fourth_ratio_se": ratio_se, "wick_mean": mean_w, "wick_mean_se": mean_se}
