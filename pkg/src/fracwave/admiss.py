"""Exact arithmetic for Strichartz exponent pairs.

All decisions use ``fractions.Fraction``; an infinite time exponent is
written ``INF`` (or ``math.inf``) and enters every formula through 1/q = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import HypothesisViolated
from .reports import FittedConstantReport, fit_constant

INF = "inf"


class Kind(enum.Enum):
    ADMISSIBLE = "ADMISSIBLE"
    DUAL = "DUAL"


def _is_inf(v) -> bool:
    return (isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "oo")) or (
        isinstance(v, float) and math.isinf(v))


def exact(v):
    """Fraction from int, Fraction, decimal/ratio string or float (via its repr); INF passes through."""
    if _is_inf(v):
        return INF
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(v)


def recip(v) -> Fraction:
    return Fraction(0) if v == INF else 1 / v


def render(v) -> str:
    return "inf" if v == INF else str(v)


@dataclass(frozen=True)
class AdmissiblePair:
    q: object
    r: object
    d: int
    s: Fraction
    kind: Kind
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def violations(self) -> list:
        return [k for k, v in self.checks.items() if not v]

    def as_row(self) -> dict:
        return {"q": render(self.q), "r": render(self.r), **self.checks}


def check_admissible(q, r, d: int, s, kind: Kind = Kind.ADMISSIBLE) -> AdmissiblePair:
    """Evaluate every (dual-)admissibility condition exactly; violations are data."""
    q, r, s, d = exact(q), exact(r), exact(s), int(d)
    kind = Kind(kind)
    iq, ir = recip(q), recip(r)
    half = Fraction(1, 2)
    if kind is Kind.ADMISSIBLE:
        checks = {
            "q_range": q == INF or q >= 2,
            "r_range": r != INF and r >= 2,
            "strichartz_gap": 2 * iq + (d - 1) * ir <= Fraction(d - 1, 2),
            "scaling": iq + d * ir == Fraction(d, 2) - s,
            "endpoint_excluded": (2 * iq, (d - 1) * (half - ir)) != (1, 1),
        }
    else:
        checks = {
            "q_range": q != INF and 1 <= q <= 2,
            "r_range": r != INF and 1 < r <= 2,
            "strichartz_gap": 2 * iq + (d - 1) * ir >= 2 + Fraction(d - 1, 2),
            "scaling": iq + d * ir == 2 + Fraction(d, 2) - s,
            "endpoint_excluded": (2 * iq, (d - 1) * (ir - half)) != (1, 1),
        }
    return AdmissiblePair(q, r, d, s, kind, checks)


@dataclass(frozen=True)
class PairConstruction:
    admissible: AdmissiblePair
    dual: AdmissiblePair
    strict_ratio_checks: dict

    @property
    def ok(self) -> bool:
        return self.admissible.ok and self.dual.ok and all(self.strict_ratio_checks.values())


def construct_pairs(d: int, s) -> PairConstruction:
    """The explicit pairs q = (d+1)/(s(d-1)), r = 2(d+1)/(d+1-4s), and duals."""
    s = exact(s)
    d = int(d)
    q = Fraction(d + 1) / (s * (d - 1))
    r = Fraction(2 * (d + 1)) / (d + 1 - 4 * s)
    qt = Fraction(d + 1) / (2 + s * (d - 1))
    rt = Fraction(2 * (d + 1)) / (5 + d - 4 * s)
    adm = check_admissible(q, r, d, s, Kind.ADMISSIBLE)
    dual = check_admissible(qt, rt, d, s, Kind.DUAL)
    ratios = {"q_gt_2qt": q > 2 * qt, "r_ge_2rt": r >= 2 * rt}
    return PairConstruction(adm, dual, ratios)


@dataclass(frozen=True)
class ScanRow:
    d: int
    s: Fraction
    r_max: object
    rt_min: Fraction
    ratio: object
    q_at_r_max: object
    qt_at_rt_min: object
    ratio_feasible: bool
    q_strict: bool
    scaling_feasible: bool
    construct_ok: bool

    def as_dict(self):
        return {
            "d": self.d, "s": str(self.s), "q": render(self.q_at_r_max), "r": render(self.r_max),
            "qt": render(self.qt_at_rt_min), "rt": render(self.rt_min), "ratio": render(self.ratio),
            "ratio_feasible": self.ratio_feasible, "q_strict": self.q_strict,
            "scaling_feasible": self.scaling_feasible, "construct_ok": self.construct_ok,
        }


def _scan_row(d: int, s: Fraction) -> ScanRow:
    denom = d + 1 - 4 * s
    r_max = INF if denom <= 0 else Fraction(2 * (d + 1)) / denom
    rt_min = Fraction(2 * (d + 1)) / (5 + d - 4 * s)
    ratio = INF if r_max == INF else r_max / rt_min
    # time exponents forced by the scaling identities at the extreme pair
    iq = Fraction(d, 2) - s - d * recip(r_max)
    iqt = 2 + Fraction(d, 2) - s - d / rt_min
    q = INF if iq == 0 else (1 / iq if iq > 0 else None)
    qt = 1 / iqt if iqt > 0 else None
    ratio_ok = ratio == INF or ratio >= 2
    if q is None or qt is None:
        q_ok = False
    else:
        q_ok = q == INF or q > 2 * qt
    construct_ok = d >= 2 and construct_pairs(d, s).ok if 0 < s < Fraction(d, 2) and d >= 2 and denom > 0 else False
    return ScanRow(d, s, r_max, rt_min, ratio, q, qt, ratio_ok, q_ok, 4 * s >= d - 3, construct_ok)


def optimality_scan(d_range, s_grid) -> list:
    """Extreme pairs (r_max, rt_min) per (d, s) and the feasibility of r >= 2 rt, q > 2 qt."""
    return [_scan_row(int(d), exact(s)) for d in d_range for s in s_grid]


def rational_grid(lo, hi, count: int, include_lo: bool = False) -> list:
    """``count`` equally spaced rationals in (lo, hi] (or [lo, hi])."""
    lo, hi = exact(lo), exact(hi)
    if count <= 0:
        return []
    if include_lo:
        return [lo + (hi - lo) * k / max(count - 1, 1) for k in range(count)]
    return [lo + (hi - lo) * k / count for k in range(1, count + 1)]


# ---------------------------------------------------------------------------
# empirical Strichartz witnesses


def _localized_band_limited(grid, rng, k_max, width):
    """Random real field with spectrum in |k| <= k_max, times a Gaussian window."""
    x = grid.mesh()
    r2 = sum(c ** 2 for c in x)
    nmodes = 12
    out = np.zeros(grid.shape)
    for _ in range(nmodes):
        k = rng.uniform(-k_max, k_max, size=grid.dim) / math.sqrt(grid.dim)
        ph = rng.uniform(0, 2 * math.pi)
        out += rng.normal() * np.cos(sum(ki * xi for ki, xi in zip(k, x)) + ph)
    return out * np.exp(-r2 / (2 * width ** 2))


def _strichartz_ratio(kind, exps, grid, T, steps, seed):
    from .field import SpaceTimeField
    from .norms import NormSpec, TimeNorm, bochner_norm, sobolev_norm
    from .solver import InitialData, duhamel, propagate_linear

    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, T, steps + 1)
    q, r = exps["q"], exps["r"]
    s1 = exps.get("s1", Fraction(0))
    qf = math.inf if q == INF else float(q)
    if kind == "homogeneous":
        mu = exps["mu"]
        phi0 = _localized_band_limited(grid, rng, exps.get("k_max", 6.0), exps.get("width", 0.6))
        phi1 = _localized_band_limited(grid, rng, exps.get("k_max", 6.0), exps.get("width", 0.6))
        w, wt = propagate_linear(InitialData(phi0, phi1, grid), times)
        rhs = sobolev_norm(phi0, grid, float(mu), 2.0) + sobolev_norm(phi1, grid, float(mu) - 1, 2.0)
    else:
        qt, rt, s2 = exps["qt"], exps["rt"], exps.get("s2", Fraction(0))
        base = [_localized_band_limited(grid, rng, exps.get("k_max", 6.0), exps.get("width", 0.6)) for _ in range(2)]
        src = np.array([math.cos(3 * t) * base[0] + math.sin(2 * t) * base[1] for t in times])
        w, wt = duhamel(src, times, grid, with_velocity=True)
        f = SpaceTimeField(times, grid, src, {})
        rhs = bochner_norm(f, NormSpec(-float(s2), float(rt), None, TimeNorm.L_Q, float(qt)))
    W = SpaceTimeField(times, grid, w, {})
    Wt = SpaceTimeField(times, grid, wt, {})
    tn = TimeNorm.L_INF if q == INF else TimeNorm.L_Q
    lhs = bochner_norm(W, NormSpec(float(s1), float(r), None, tn, qf)) + \
        bochner_norm(Wt, NormSpec(float(s1) - 1, float(r), None, tn, qf))
    return lhs, rhs


def strichartz_witness(d: int, exps: dict, grid, T: float, samples: int, *, kind: str = "homogeneous",
                       steps: int = 64, seed: int = 0, refine: bool = True) -> FittedConstantReport:
    """Fit C in LHS <= C RHS for random localized band-limited data.

    ``exps`` holds q, r (and s1, default 0) for the solution norm; ``mu`` for
    the homogeneous estimate, or qt, rt, s2 for the inhomogeneous one.  The
    hypotheses are checked exactly first.  With ``refine`` the same data
    (same seeds) are re-evaluated on a grid with twice the points per axis and
    twice the time steps; PASS iff the constant grows by less than 2x.
    ``k_max_list`` cycles the data bandwidth over the samples.
    """
    d = int(d)
    q, r = exact(exps["q"]), exact(exps["r"])
    ex = dict(exps, q=q, r=r)
    iq, ir = recip(q), recip(r)
    half = Fraction(1, 2)
    ok = d >= 2 and (q == INF or q >= 2) and r != INF and r >= 2 and 2 * iq + (d - 1) * ir <= Fraction(d - 1, 2) \
        and (2 * iq, (d - 1) * (half - ir)) != (1, 1)
    s1 = exact(exps.get("s1", 0))
    if kind == "homogeneous":
        mu = exact(exps["mu"])
        ok = ok and mu == s1 + Fraction(d, 2) - (iq + d * ir)
        ex["mu"] = mu
    else:
        qt, rt, s2 = exact(exps["qt"]), exact(exps["rt"]), exact(exps.get("s2", 0))
        iqt, irt = recip(qt), recip(rt)
        ok = ok and 1 <= qt <= 2 and 1 < rt <= 2 and 2 * iqt + (d - 1) * irt >= 2 + Fraction(d - 1, 2) \
            and (2 * iqt, (d - 1) * (irt - half)) != (1, 1) \
            and s1 - (iq + d * ir) == 2 - s2 - (iqt + d * irt)
        ex.update(qt=qt, rt=rt, s2=s2)
    if not ok:
        raise HypothesisViolated(f"exponents {exps} violate the Strichartz hypotheses for d={d}")
    if grid.dim != d:
        raise HypothesisViolated("grid dimension differs from d")

    scales = list(exps.get("k_max_list", [exps.get("k_max", 6.0)]))

    def run(g, st):
        lhs, rhs = [], []
        for k in range(samples):
            a, b = _strichartz_ratio(kind, dict(ex, k_max=scales[k % len(scales)]), g, T, st, seed + k)
            lhs.append(a)
            rhs.append(b)
        return fit_constant(lhs, rhs, list(range(samples)))

    base = run(grid, steps)
    if not refine:
        return base
    from .field import GridSpec

    fine = run(GridSpec(grid.dim, 2 * grid.points, grid.half_width), 2 * steps)
    return base.with_refinement(fine.constant, growth_limit=2.0)
