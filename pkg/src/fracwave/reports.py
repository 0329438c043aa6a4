"""Small report records shared by the witness and study functions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

PASS = "PASS"
FAIL = "FAIL"


@dataclass(frozen=True)
class FittedConstantReport:
    constant: float
    argmax: object
    n_used: int
    n_skipped: int
    refined_constant: float = None
    growth: float = None
    status: str = PASS

    def with_refinement(self, refined_constant, growth_limit):
        growth = refined_constant / self.constant if self.constant > 0 else (np.inf if refined_constant > 0 else 1.0)
        status = PASS if np.isfinite(refined_constant) and growth < growth_limit else FAIL
        return dataclasses.replace(self, refined_constant=float(refined_constant), growth=float(growth), status=status)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["argmax"] = None if self.argmax is None else [float(v) for v in np.ravel(self.argmax)]
        return d


def fit_constant(lhs, rhs, samples=None) -> FittedConstantReport:
    """Smallest C with lhs <= C rhs; samples with lhs == rhs == 0 are skipped."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    keep = ~((lhs == 0) & (rhs == 0))
    if not np.any(keep):
        return FittedConstantReport(0.0, None, 0, int(lhs.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs[keep] > 0, lhs[keep] / rhs[keep], np.inf)
    i = int(np.argmax(ratio))
    arg = None
    if samples is not None:
        arg = [s for s, k in zip(samples, keep) if k][i]
    c = float(ratio[i])
    return FittedConstantReport(c, arg, int(keep.sum()), int((~keep).sum()),
                                status=PASS if np.isfinite(c) else FAIL)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class CheckResult:
    """Outcome of one numerical check: name, pass flag and the numbers behind it."""

    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = PASS if self.passed else FAIL
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{tag}] {self.name}: {info}"

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "details": _jsonable(self.details)}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, int, float, str)) or v is None:
        return v
    if hasattr(v, "item"):
        return v.item()
    return str(v)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], float):
        return "[" + ", ".join(f"{x:.4g}" for x in v) + "]"
    return str(v)
