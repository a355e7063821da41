"""Order, type, m_k decay and Gaussian-continuity verdicts from finite data.

Every estimate here is a statement about a truncated sequence.  Limits are
extrapolated by least squares against the asymptotic expansion of
``ln(1/V_n)`` (a Stirling-type basis ``n ln n, n, ln n, 1``); the pointwise
ratios the limits are defined through converge like ``1/ln n`` and are only
reported as diagnostics.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, WindowError
from .volseq import VolumeSequence, log_mk_sequence, mk_sequence

log = logging.getLogger(__name__)

MIN_WINDOW = 8
GC_THRESHOLD = 1e-3
# rho_hat must clear 1 by this much (plus two standard errors) for a GC call.
RHO_MARGIN = 0.02
# Relative spread of m_k over the trailing window below which it counts as flat.
FLAT_RTOL = 1e-2
GV_MARGIN = 0.05


class Classification(str, enum.Enum):
    GC = "GC"
    NOT_GC = "NotGC"
    INCONCLUSIVE = "Inconclusive"


def default_window(k_max: int) -> tuple[int, int]:
    return max(2, k_max // 5), k_max


def _check_window(window, k_max, lo_min=2):
    if window is None:
        window = default_window(k_max)
    lo, hi = int(window[0]), int(window[1])
    if lo < lo_min or hi > k_max or lo > hi:
        raise WindowError(f"window [{lo}, {hi}] not inside [{lo_min}, {k_max}]")
    if hi - lo + 1 < MIN_WINDOW:
        raise WindowError(f"window [{lo}, {hi}] has fewer than {MIN_WINDOW} points")
    return lo, hi


def _ols(A: np.ndarray, y: np.ndarray):
    """Least squares with column scaling; returns coef, stderr, rms residual."""
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    coef_s, *_ = np.linalg.lstsq(As, y, rcond=None)
    resid = y - As @ coef_s
    n, p = A.shape
    dof = max(n - p, 1)
    s2 = float(resid @ resid) / dof
    cov_s = s2 * np.linalg.pinv(As.T @ As)
    coef = coef_s / scale
    stderr = np.sqrt(np.abs(np.diag(cov_s))) / scale
    return coef, stderr, float(np.sqrt(np.mean(resid ** 2)))


@dataclass(frozen=True)
class OrderEstimate:
    rho_hat: float
    rho_raw: float
    rho_stderr: float
    window: tuple[int, int] | None
    residual: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def estimate_order_from_coeffs(v: VolumeSequence, window=None) -> OrderEstimate:
    """Order from ``rho = lim n ln n / ln(1/V_n)`` by regression extrapolation.

    Terminating sequences give a polynomial and return ``rho = 0`` at once.
    """
    if v.terminates:
        return OrderEstimate(0.0, 0.0, 0.0, None, 0.0, "coeffs",
                             {"note": f"terminating sequence (V_k = 0 for k > {v.last_finite})"})
    lo, hi = _check_window(window, v.k_max)
    n = np.arange(lo, hi + 1, dtype=float)
    y = -v.logV[lo:hi + 1]
    A = np.column_stack([n * np.log(n), n, np.log(n), np.ones_like(n)])
    coef, se, rms = _ols(A, y)
    b = coef[0]
    naive = float(hi * math.log(hi) / y[-1]) if y[-1] > 0 else math.inf
    diag = {"coef_nlogn": float(b), "naive_rho_end": naive}
    if b <= 0:
        log.warning("n ln n coefficient %.3g <= 0: sequence does not decay like a GB profile", b)
        rho_raw, rho_se = math.inf, math.inf
        diag["warning"] = "non-positive n ln n coefficient"
    else:
        rho_raw = 1.0 / b
        rho_se = float(se[0] / b ** 2)
    return OrderEstimate(float(min(max(rho_raw, 0.0), 1.0)), float(rho_raw), rho_se,
                         (lo, hi), rms, "coeffs", diag)


def naive_order_ratios(v: VolumeSequence) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise ``n ln n / ln(1/V_n)`` for ``n >= 2`` (plot data)."""
    n = np.arange(2, v.k_max + 1, dtype=float)
    y = -v.logV[2:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(np.isfinite(y) & (y > 0), n * np.log(n) / y, np.nan)
    return n.astype(int), r


def _positive_mk(v, window):
    """Window indices and ``ln m_k`` on them; m_k must be positive throughout."""
    lm = log_mk_sequence(v)
    if window is not None and int(window[1]) == v.k_max:
        # m_k needs V_{k+1}; let a window ending at k_max mean "to the last ratio"
        window = (window[0], lm.size - 1)
    lo, hi = _check_window(window, lm.size - 1, lo_min=1)
    seg = lm[lo:hi + 1]
    if np.any(~np.isfinite(seg)):
        k = lo + int(np.flatnonzero(~np.isfinite(seg))[0])
        raise WindowError(f"m_{k} = 0 inside the window: finite-dimensional sequence (rho = 0)")
    return np.arange(lo, hi + 1, dtype=float), seg, (lo, hi)


def estimate_order_from_mk(v: VolumeSequence, window=None, check=True) -> OrderEstimate:
    """Order from ``rho = limsup ln k / (-ln(m_k / k))`` by a straight-line fit."""
    k, lm, win = _positive_mk(v, window)
    A = np.column_stack([np.log(k), np.ones_like(k)])
    coef, se, rms = _ols(A, np.log(k) - lm)
    slope = coef[0]
    rho_raw = 1.0 / slope if slope > 0 else math.inf
    rho_se = float(se[0] / slope ** 2) if slope > 0 else math.inf
    diag = {"slope": float(slope)}
    if check and not v.terminates:
        try:
            other = estimate_order_from_coeffs(v, (max(win[0], 2), win[1]))
            diag["coeffs_rho"] = other.rho_hat
            diag["disagreement"] = abs(other.rho_hat - min(max(rho_raw, 0.0), 1.0))
        except WindowError:
            pass
    return OrderEstimate(float(min(max(rho_raw, 0.0), 1.0)), float(rho_raw), rho_se, win,
                         rms, "mk", diag)


@dataclass(frozen=True)
class TypeEstimate:
    sigma_hat: float
    rho: float
    n_eval: int
    trailing: tuple[float, ...]


def estimate_type(v: VolumeSequence, rho: float, n_eval: int | None = None,
                  trail: int = 10) -> TypeEstimate:
    """Type from ``(sigma e rho)^(1/rho) = lim n^(1/rho) V_n^(1/n)``."""
    if not rho > 0 or rho > 1:
        raise InvalidInputError(f"type needs 0 < rho <= 1, got {rho}")
    n_eval = v.k_max if n_eval is None else int(n_eval)
    if n_eval < 1 or n_eval > v.k_max:
        raise InvalidInputError(f"n_eval={n_eval} outside [1, {v.k_max}]")
    if not np.isfinite(v.logV[n_eval]):
        raise InvalidInputError(f"V_{n_eval} = 0; type formula needs a positive coefficient")

    def sigma_at(n):
        ln_t = math.log(n) / rho + v.logV[n] / n
        return math.exp(rho * ln_t) / (math.e * rho)

    lo = max(1, n_eval - trail)
    trailing = tuple(sigma_at(n) for n in range(lo, n_eval + 1) if np.isfinite(v.logV[n]))
    return TypeEstimate(sigma_at(n_eval), float(rho), n_eval, trailing)


@dataclass(frozen=True)
class DecayEstimate:
    exponent: float | None
    slope: float
    stderr: float
    window: tuple[int, int]
    expected: float | None = None


def mk_decay_exponent(v: VolumeSequence, window=None, rho: float | None = None,
                      flat_tol: float = 1e-3) -> DecayEstimate:
    """Slope of ``ln m_k`` against ``ln k``; ``exponent=None`` when m_k is flat.

    If ``rho`` is given, ``expected = 1 - 1/rho`` is attached for comparison.
    """
    k, lm, win = _positive_mk(v, window)
    A = np.column_stack([np.log(k), np.ones_like(k)])
    coef, se, _ = _ols(A, lm)
    slope = float(coef[0])
    expected = None
    if rho is not None:
        expected = -math.inf if rho <= 0 else 1.0 - 1.0 / rho
    exponent = None if abs(slope) < flat_tol else min(slope, 0.0)
    return DecayEstimate(exponent, slope, float(se[0]), win, expected)


@dataclass(frozen=True)
class OscillationBounds:
    lower: float
    upper: float
    trend: float
    monotone: bool
    note: str


def oscillation_bounds(v: VolumeSequence, trail: int | None = None) -> OscillationBounds:
    """Bracket ``osc(K) = lim m_k`` by ``[0, m_last]``.

    The upper end is rigorous for ultra-log-concave input because m_k is
    non-increasing.  ``trend`` is the relative drop of m_k over the trailing
    window.
    """
    m = mk_sequence(v)
    if m.size == 0:
        return OscillationBounds(0.0, math.inf, 0.0, True, "no ratios: sequence has one term")
    upper = float(m[-1])
    trail = max(1, m.size // 5) if trail is None else trail
    first = m[max(0, m.size - 1 - trail)]
    trend = float((first - upper) / first) if first > 0 else 0.0
    monotone = bool(np.all(np.diff(m) <= 1e-9 * np.maximum(m[:-1], 1e-300)))
    note = ("upper bound rigorous by monotonicity; no positive lower bound "
            "follows from finitely many terms")
    if not monotone:
        note = "m_k is not monotone: input is not ultra-log-concave, bound not rigorous"
    return OscillationBounds(0.0, upper, trend, monotone, note)


@dataclass(frozen=True)
class GaoVitaleResult:
    verdict: str
    exponent: float
    sqrt_scaled_increasing: bool
    decrease_factor: float
    window: tuple[int, int]


def gao_vitale_test(v: VolumeSequence, window=None, margin: float = GV_MARGIN) -> GaoVitaleResult:
    """Look for m_k tending to 0 more slowly than ``k^(-1/2)``.

    ``violated`` needs all three: a fitted decay exponent above
    ``-1/2 + margin``, ``m_k sqrt(k)`` increasing over the trailing half of the
    window, and at least a twofold drop of m_k across the window.
    """
    if window is None:
        window = (max(1, v.k_max // 20), v.k_max - 1)
    k, lm, win = _positive_mk(v, window)
    slope = float(np.polyfit(np.log(k), lm, 1)[0])
    half = k.size // 2
    scaled = lm[half:] + 0.5 * np.log(k[half:])
    increasing = bool(np.all(np.diff(scaled) > 0))
    drop = float(np.exp(min(lm[0] - lm[-1], 700.0)))
    violated = slope > -0.5 + margin and increasing and drop >= 2.0
    return GaoVitaleResult("violated" if violated else "consistent", slope, increasing, drop, win)


@dataclass(frozen=True)
class GrowthReport:
    rho_hat: float
    rho_raw: float
    rho_stderr: float
    sigma_hat: float | None
    mk_decay_exponent_hat: float | None
    osc_upper: float
    classification: Classification
    window: tuple[int, int] | None
    residual: float
    trailing_flat: bool = False
    mk_decreasing: bool = True
    gc_threshold: float = GC_THRESHOLD
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        d["sigma_hat"] = "undefined" if self.sigma_hat is None else self.sigma_hat
        if self.mk_decay_exponent_hat is None:
            d["mk_decay_exponent_hat"] = "none"
        d["window"] = list(self.window) if self.window else None
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def classify_gc(report: GrowthReport, gc_threshold: float | None = None) -> Classification:
    """Numerical GC verdict on a truncated sequence.

    GC when rho is clearly below 1, or when the last ratio is under the
    threshold and still falling.  NotGC when m_k sits flat above the
    threshold and rho is consistent with 1; that call is heuristic, since a
    limit of 0 can never be excluded from finitely many terms.
    """
    thr = report.gc_threshold if gc_threshold is None else gc_threshold
    if report.rho_hat + 2 * report.rho_stderr < 1 - RHO_MARGIN:
        return Classification.GC
    if report.osc_upper < thr and report.mk_decreasing:
        return Classification.GC
    if report.trailing_flat and report.osc_upper >= thr and \
            report.rho_hat + 2 * report.rho_stderr >= 1 - RHO_MARGIN:
        return Classification.NOT_GC
    return Classification.INCONCLUSIVE


def analyze(v: VolumeSequence, window=None, gc_threshold: float = GC_THRESHOLD,
            rho_for_type: float | None = None) -> GrowthReport:
    """Run every estimator and assemble a :class:`GrowthReport`.

    Short or degenerate sequences produce an Inconclusive report with the
    reason in ``diagnostics`` instead of raising.
    """
    diag: dict = {}
    m = mk_sequence(v)
    osc = oscillation_bounds(v)
    diag["oscillation"] = asdict(osc)
    flat = bool(abs(osc.trend) <= FLAT_RTOL)
    decreasing = osc.trend > 0 or osc.upper == 0.0

    try:
        order = estimate_order_from_coeffs(v, window)
    except WindowError as exc:
        diag["error"] = f"window too short: {exc}"
        rep = GrowthReport(math.nan, math.nan, math.inf, None, None, osc.upper,
                           Classification.INCONCLUSIVE, None, math.nan, flat, decreasing,
                           gc_threshold, diag)
        return rep
    diag["order_coeffs"] = order.diagnostics
    win = order.window

    decay_exp = None
    if not v.terminates:
        mk_win = (win[0], min(win[1], m.size - 1))
        try:
            om = estimate_order_from_mk(v, mk_win, check=False)
            diag["rho_from_mk"] = om.rho_hat
            de = mk_decay_exponent(v, mk_win, rho=order.rho_hat)
            decay_exp = de.exponent
            diag["mk_decay_slope"] = de.slope
            diag["mk_decay_expected"] = de.expected
            gv = gao_vitale_test(v)
            diag["gao_vitale"] = asdict(gv)
        except WindowError as exc:
            diag["mk_error"] = str(exc)
    else:
        decay_exp = -math.inf

    sigma = None
    rho_t = rho_for_type
    if rho_t is None and order.rho_hat + 2 * order.rho_stderr >= 1 - RHO_MARGIN:
        rho_t = 1.0
    if rho_t is not None and not v.terminates:
        sigma = estimate_type(v, rho_t).sigma_hat
        diag["type_rho"] = rho_t

    rep = GrowthReport(order.rho_hat, order.rho_raw, order.rho_stderr, sigma, decay_exp,
                       osc.upper, Classification.INCONCLUSIVE, win, order.residual, flat,
                       decreasing, gc_threshold, diag)
    return _with_class(rep)


def _with_class(rep: GrowthReport) -> GrowthReport:
    return replace(rep, classification=classify_gc(rep))
