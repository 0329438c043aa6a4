"""The wave kernel

    gamma_t(xi, r) = e^{i xi t} int_0^t e^{-i xi s} sin(s r) / r ds

and its time increments.

The closed form is evaluated as ``t e^{i xi t} / (2 r) * [E((-r-xi) t) - E((r-xi) t)]``
with ``E(z) = (e^{iz} - 1) / z``.  ``E`` is a removable singularity at 0, so
inside a small window around resonance (``|xi -+ r| t < RESONANCE_WINDOW``)
it is replaced by a 4-term Taylor polynomial.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySampleSet, InvalidTimeOrder, NonPositiveRadius, ToleranceNotReached
from .reports import FittedConstantReport, fit_constant

RESONANCE_WINDOW = 1e-4


class Branch(enum.Enum):
    CLOSED_FORM = "CLOSED_FORM"
    SERIES_NEAR_RESONANCE = "SERIES_NEAR_RESONANCE"


class Bound(enum.Enum):
    POINTWISE = "POINTWISE"
    WEIGHTED_XI = "WEIGHTED_XI"


@dataclass(frozen=True)
class GammaEval:
    value: complex
    t: float
    s: float
    xi: float
    r: float
    branch: Branch


def _check_r(r):
    if np.any(np.asarray(r) <= 0):
        raise NonPositiveRadius("r must be > 0")


def phase_quotient(z, series_mask=None):
    """``(e^{iz} - 1) / z`` with the value ``i`` at ``z = 0``."""
    z = np.asarray(z, dtype=float)
    # i e^{iz/2} sin(z/2)/(z/2); np.sinc(x) = sin(pi x)/(pi x)
    out = 1j * np.exp(0.5j * z) * np.sinc(z / (2 * np.pi))
    if series_mask is not None and np.any(series_mask):
        iz = 1j * z[series_mask]
        out = np.array(out, copy=True)
        out[series_mask] = 1j * (1 + iz / 2 + iz * iz / 6 + iz * iz * iz / 24)
    return out


def _gamma(t, xi, r, window_t):
    t, xi, r, window_t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, xi, r, window_t)))
    a = r - xi
    b = -r - xi
    sa = np.abs(a) * window_t < RESONANCE_WINDOW
    sb = np.abs(b) * window_t < RESONANCE_WINDOW
    ea = phase_quotient(a * t, sa)
    eb = phase_quotient(b * t, sb)
    val = t * np.exp(1j * xi * t) / (2 * r) * (eb - ea)
    return val, sa | sb


def gamma_closed(t, xi, r):
    """Closed-form gamma_t(xi, r); broadcasts over array arguments."""
    _check_r(r)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    val, _ = _gamma(t, xi, r, t)
    return val[()] if val.ndim == 0 else val


def gamma_eval(t: float, xi: float, r: float) -> GammaEval:
    _check_r(r)
    val, series = _gamma(t, xi, r, t)
    branch = Branch.SERIES_NEAR_RESONANCE if bool(series) else Branch.CLOSED_FORM
    return GammaEval(complex(val), float(t), 0.0, float(xi), float(r), branch)


def gamma_increment(s, t, xi, r):
    """gamma_t - gamma_s, both evaluated on the branch selected by ``t``."""
    _check_r(r)
    s_arr, t_arr = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any(s_arr > t_arr):
        raise InvalidTimeOrder("need s <= t")
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    vt, _ = _gamma(t_arr, xi, r, t_arr)
    vs, _ = _gamma(s_arr, xi, r, t_arr)
    val = vt - vs
    return val[()] if val.ndim == 0 else val


def gamma_abs2(t, xi, r):
    """|gamma_t(xi, r)|^2 as a real expression, no complex arithmetic.

    |gamma|^2 = t^2/(4 r^2) [(Sa - Sb)^2 + 4 Sa Sb sin^2(r t / 2)] with
    Sa = sinc((r - xi) t / 2), Sb = sinc((r + xi) t / 2); the bracket is
    Sa^2 + Sb^2 - 2 Sa Sb cos(r t) without the cancellation at small r t.
    """
    t = np.asarray(t, dtype=float)
    sa = np.sinc((r - xi) * (t / (2 * np.pi)))
    sb = np.sinc((r + xi) * (t / (2 * np.pi)))
    half = np.sin(0.5 * r * t)
    return (t * t) / (4 * r * r) * ((sa - sb) ** 2 + 4 * sa * sb * half * half)


def gamma_dt(h, xi, r):
    """Time derivative of gamma: int_0^h e^{i xi s} cos((h - s) r) ds."""
    h = np.asarray(h, dtype=float)
    a = (xi - r) * h
    b = (xi + r) * h
    ea = phase_quotient(a, np.abs(a) < RESONANCE_WINDOW)
    eb = phase_quotient(b, np.abs(b) < RESONANCE_WINDOW)
    # int_0^h e^{i a v} dv = -i h E(a h)
    return -0.5j * h * (np.exp(1j * r * h) * ea + np.exp(-1j * r * h) * eb)


_GL_LO = np.polynomial.legendre.leggauss(16)
_GL_HI = np.polynomial.legendre.leggauss(24)


def _panel_rule(t, npan, rule):
    x, w = rule
    edges = np.linspace(0.0, t, npan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def gamma_quadrature_oracle(t: float, xi: float, r: float, tol: float = 1e-12,
                            max_panels: int = 1 << 16) -> complex:
    """Direct quadrature of the defining integral (independent of the closed form).

    Composite Gauss-Legendre on panels no wider than a fraction of the
    shortest oscillation period; the panel count doubles until a 16-node and
    a 24-node rule agree to ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    _check_r(r)
    if t == 0:
        return 0j
    freq = abs(xi) + r + 1.0
    npan = max(1, int(math.ceil(t * freq / math.pi)))
    err = math.inf
    while npan <= max_panels:
        vals = []
        for rule in (_GL_LO, _GL_HI):
            s, w = _panel_rule(t, npan, rule)
            f = np.exp(-1j * xi * s) * np.sin(s * r) / r
            vals.append(np.sum(w * f))
        err = abs(vals[1] - vals[0])
        if err < tol:
            return complex(np.exp(1j * xi * t) * vals[1])
        npan *= 2
    raise ToleranceNotReached(f"quadrature error estimate {err:.3g} above tol {tol:.3g}")


# ---------------------------------------------------------------------------
# bound witnesses


def _phase_quotient_scalar(z, series):
    if series:
        iz = 1j * z
        return 1j * (1 + iz / 2 + iz * iz / 6 + iz * iz * iz / 24)
    return (cmath.exp(1j * z) - 1) / z


def _gamma_scalar(t, xi, r, window_t):
    """Scalar twin of ``_gamma`` for quadrature integrands."""
    a = r - xi
    b = -r - xi
    ea = _phase_quotient_scalar(a * t, abs(a) * window_t < RESONANCE_WINDOW)
    eb = _phase_quotient_scalar(b * t, abs(b) * window_t < RESONANCE_WINDOW)
    return t * cmath.exp(1j * xi * t) / (2 * r) * (eb - ea)


def weighted_xi_integral(s, t, r, hurst0, tol=1e-10):
    """int_R |gamma_{s,t}(xi, r)|^2 / |xi|^{2H - 1} dxi.

    Adaptive quadrature out to ``r + 50``; beyond that the leading
    asymptotic term is integrated in closed form.
    """
    from scipy import integrate

    beta = 1.0 - 2.0 * hurst0
    _check_r(r)
    if not 0 <= s <= t:
        raise InvalidTimeOrder("need 0 <= s <= t")

    def f(xi):
        return abs(_gamma_scalar(t, xi, r, t) - _gamma_scalar(s, xi, r, t)) ** 2

    pts = sorted({max(r - 2.0, 0.0), r, r + 2.0})
    edges = [0.0] + [p for p in pts if p > 0] + [r + 50.0]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a == 0.0:
            val, _ = integrate.quad(f, a, b, weight="alg", wvar=(beta, 0.0), limit=400, epsabs=tol)
        else:
            val, _ = integrate.quad(lambda x: x ** beta * f(x), a, b, limit=400, epsabs=tol)
        total += val
    # far from the ridge gamma_t - gamma_s ~ i (sin tr - sin sr) / (r xi); relative error O(1/xi)
    amp = (math.sin(t * r) - math.sin(s * r)) ** 2 / (r * r)
    tail = amp * edges[-1] ** (beta - 1.0) / (1.0 - beta)
    return 2.0 * (total + tail)


def weighted_xi_rhs(s, t, r, kappa, hurst0, eps):
    """|t-s|^(2 kappa) min(1, r^-(2 + 2(H - kappa)) + r^-(1 + 2H - eps))."""
    dt = abs(t - s) ** (2 * kappa)
    return dt * min(1.0, r ** (-(2 + 2 * (hurst0 - kappa))) + r ** (-(1 + 2 * hurst0 - eps)))


def bound_witness_gamma(samples, which: Bound, *, hurst0: float = None, eps: float = None,
                        refined_samples=None) -> FittedConstantReport:
    """Fit the smallest C with LHS <= C * RHS over ``samples``.

    POINTWISE samples are tuples ``(s, t, xi, r, kappa, lam)`` and bound
    |gamma_{s,t}| itself.  WEIGHTED_XI samples are ``(s, t, r, kappa)`` and
    bound the xi-integral of |gamma_{s,t}|^2 |xi|^(1-2H); ``hurst0`` and
    ``eps`` are passed separately.
    With ``refined_samples`` the fit is repeated on the finer set and the
    report fails when the constant grows by more than 10x.
    """
    samples = list(samples)
    if not samples:
        raise EmptySampleSet("no samples")
    which = Bound(which)

    def evaluate(smp):
        lhs, rhs = [], []
        for row in smp:
            if which is Bound.POINTWISE:
                s, t, xi, r, kappa, lam = row
                lhs.append(abs(gamma_increment(s, t, xi, r)))
                rhs.append(float(pointwise_rhs(s, t, xi, r, kappa, lam)))
            else:
                s, t, r, kappa = row
                if hurst0 is None or eps is None:
                    raise ValueError("WEIGHTED_XI witness needs hurst0 and eps")
                lhs.append(weighted_xi_integral(s, t, r, hurst0))
                rhs.append(weighted_xi_rhs(s, t, r, kappa, hurst0, eps))
        return np.array(lhs), np.array(rhs)

    lhs, rhs = evaluate(samples)
    report = fit_constant(lhs, rhs, samples)
    if refined_samples is not None:
        l2, r2 = evaluate(list(refined_samples))
        finer = fit_constant(l2, r2, list(refined_samples))
        report = report.with_refinement(finer.constant, growth_limit=10.0)
    return report


def pointwise_rhs(s, t, xi, r, kappa, lam):
    """Right-hand side of the kernel bound, without its hidden constant.

    |t-s|^kappa min(1 + |xi|^kappa, 1/|xi| + 1/|xi|^(1-kappa),
                    (r^kappa + |xi|^kappa) / (r ||xi| - r|^(1 - lam (1 - kappa))))
    """
    ax = abs(xi)
    terms = [1.0 + ax ** kappa]
    if ax > 0:
        terms.append(1.0 / ax + 1.0 / ax ** (1 - kappa))
    gap = abs(ax - r)
    expo = 1 - lam * (1 - kappa)
    if gap > 0 or expo == 0:
        terms.append((r ** kappa + ax ** kappa) / (r * gap ** expo))
    return abs(t - s) ** kappa * min(terms)
