"""Intrinsic-volume sequences of model convex compacts.

All sequences are stored as natural logarithms ``logV[k] = ln V_k`` with
``-inf`` for vanishing volumes: the Wiener spiral already has
``V_150 < 1e-300``.

Three families have closed forms:

* the closed convex hull of the Wiener spiral, ``V_k = kappa_k / k!``;
* the hull of the Wiener spiral bridge, ``V_k = kappa_{k+1} / (2 k!)``;
* rectangular boxes ``prod [0, l_j]``, where ``V_k`` is the elementary
  symmetric polynomial ``e_k(l_1, l_2, ...)``.

Infinite boxes are generated from a rule for the side lengths.  The first
``J`` sides are multiplied in exactly; the remaining sides are folded in
through their power sums, which are known in closed form (Hurwitz zeta) or
by Euler-Maclaurin summation.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaln, zeta

from .errors import InconsistentSequenceError, InvalidInputError, InvalidSpecError

log = logging.getLogger(__name__)

SOURCES = ("spiral", "bridge", "box", "user")
RULES = ("power_law", "exponential", "log_squared")

LOG_SLACK = 1e-9
# Tail/head ratio for dropped tails.
DROP_TAIL_RTOL = 1e-12
# Largest J for which a side list is materialised.
J_MAX = 2_000_000
# Bound on k_max * l_{J+1} / p_1(tail): keeps the power-sum recurrence
# dominated by its leading term.
TAIL_RATIO_MAX = 0.25
N_POWER_SUMS = 64
EM_START = 4096


def log_kappa(j):
    """Log-volume of the unit ``j``-ball, ``ln(pi^(j/2) / Gamma(j/2 + 1))``."""
    j = np.asarray(j, dtype=float)
    if np.any(j < 0):
        raise InvalidInputError("ball dimension must be non-negative")
    out = 0.5 * j * math.log(math.pi) - gammaln(0.5 * j + 1.0)
    return float(out) if out.ndim == 0 else out


def kappa(j):
    """Volume of the unit ``j``-ball.

    >>> round(kappa(3), 8)
    4.1887902
    """
    return np.exp(log_kappa(j))


# ---------------------------------------------------------------------------
# Sequence container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeSequence:
    """Log-domain intrinsic volumes ``V_0 .. V_kmax``.

    ``tail_bound`` is a numeric companion to the free-text ``tail_error``
    (zero when the sequence is exact up to rounding).
    """

    logV: np.ndarray
    source: str
    tail_error: str = ""
    tail_bound: float = 0.0
    dimension: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.array(self.logV, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidInputError("logV must be a non-empty 1-D array")
        if np.any(np.isnan(arr)) or np.any(arr == np.inf):
            raise InvalidInputError("logV entries must be finite or -inf")
        if arr[0] != 0.0:
            raise InvalidInputError(f"V_0 must equal 1, got exp({arr[0]!r})")
        if self.source not in SOURCES:
            raise InvalidInputError(f"unknown source {self.source!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "logV", arr)

    @property
    def k_max(self) -> int:
        return self.logV.size - 1

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.logV)

    @property
    def last_finite(self) -> int:
        """Index of the last non-vanishing volume."""
        return int(np.flatnonzero(np.isfinite(self.logV))[-1])

    @property
    def terminates(self) -> bool:
        """True when ``V_k = 0`` is known for all large k.

        Either the computed range already shows it, or the sequence belongs to
        a body of finite dimension covered by the computed range.
        """
        return self.last_finite < self.k_max or (
            self.dimension is not None and self.dimension <= self.k_max)

    def __len__(self):
        return self.logV.size

    def truncated(self, k_max: int) -> "VolumeSequence":
        if k_max < 0 or k_max > self.k_max:
            raise InvalidInputError(f"k_max={k_max} outside [0, {self.k_max}]")
        return VolumeSequence(self.logV[: k_max + 1], self.source, self.tail_error,
                              self.tail_bound, self.dimension, dict(self.meta))

    def to_json_dict(self) -> dict:
        return {
            "source": self.source,
            "k_max": self.k_max,
            "logV": [_encode_log(x) for x in self.logV],
            "tail_error": self.tail_error,
            "tail_bound": self.tail_bound,
            "dimension": self.dimension,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "VolumeSequence":
        try:
            logv = [_decode_log(x) for x in d["logV"]]
            source = d.get("source", "user")
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed sequence JSON: {exc}") from exc
        if "k_max" in d and int(d["k_max"]) != len(logv) - 1:
            raise InvalidInputError("k_max does not match the length of logV")
        return cls(np.array(logv), source, d.get("tail_error", ""),
                   float(d.get("tail_bound", 0.0)), d.get("dimension"))

    def to_csv(self, with_mk: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["k", "V_k", "logV_k"] + (["m_k"] if with_mk else [])
        w.writerow(header)
        mk = mk_sequence(self) if with_mk else None
        for k, lv in enumerate(self.logV):
            row = [k, repr(float(math.exp(lv))) if lv > -np.inf else "0", _encode_log(lv)]
            if with_mk:
                row.append(repr(float(mk[k])) if k < mk.size else "")
            w.writerow(row)
        return buf.getvalue()


def _encode_log(x):
    return "-inf" if x == -np.inf else float(x)


def _decode_log(x):
    if isinstance(x, str):
        if x.strip().lower() in ("-inf", "-infinity"):
            return -np.inf
        raise ValueError(f"bad logV entry {x!r}")
    return float(x)


# ---------------------------------------------------------------------------
# Closed-form families
# ---------------------------------------------------------------------------


def spiral_volume_sequence(k_max: int) -> VolumeSequence:
    """Wiener spiral hull: ``V_k = kappa_k / k!``."""
    k = _index_range(k_max)
    logv = log_kappa(k) - gammaln(k + 1.0)
    logv[0] = 0.0
    return VolumeSequence(logv, "spiral")


def bridge_volume_sequence(k_max: int) -> VolumeSequence:
    """Wiener spiral bridge hull: ``V_k = kappa_{k+1} / (2 k!)``."""
    k = _index_range(k_max)
    logv = log_kappa(k + 1.0) - math.log(2.0) - gammaln(k + 1.0)
    logv[0] = 0.0  # kappa_1 / 2 = 1 exactly
    return VolumeSequence(logv, "bridge")


def _index_range(k_max):
    if int(k_max) != k_max or k_max < 0:
        raise InvalidInputError(f"k_max must be a non-negative integer, got {k_max!r}")
    return np.arange(int(k_max) + 1, dtype=float)


def user_volume_sequence(values) -> VolumeSequence:
    """Wrap raw values ``V_0, V_1, ...`` without checking any inequality."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise InvalidInputError("expected a non-empty list of volumes")
    if np.any(~np.isfinite(vals)):
        raise InvalidInputError("volumes must be finite")
    if np.any(vals < 0):
        k = int(np.flatnonzero(vals < 0)[0])
        raise InvalidInputError(f"negative volume V_{k} = {vals[k]}")
    if vals[0] != 1.0:
        raise InvalidInputError(f"V_0 must equal 1, got {vals[0]}")
    with np.errstate(divide="ignore"):
        logv = np.log(vals)
    return VolumeSequence(logv, "user")


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxSpec:
    """Side lengths of a finite or infinite rectangular box.

    Either ``sides`` is an explicit finite list, or ``rule``/``param``
    generate ``l_j`` for ``j = 1, 2, ...``:

    ``power_law``    ``l_j = j^-param``, ``param > 1``
    ``exponential``  ``l_j = exp(-param * j)``, ``param > 0``
    ``log_squared``  ``l_j = 1 / (i ln^2 i)`` with ``i = j + 1``

    ``j_cut=None`` picks the cut automatically.  With ``tail="analytic"``
    the sides beyond the cut are still accounted for exactly; with
    ``tail="drop"`` the box is the finite truncation to ``j_cut`` sides.
    """

    sides: tuple | None = None
    rule: str | None = None
    param: float | None = None
    j_cut: int | None = None
    tail: str = "analytic"

    def __post_init__(self):
        if (self.sides is None) == (self.rule is None):
            raise InvalidSpecError("give exactly one of explicit sides or a rule")
        if self.tail not in ("analytic", "drop"):
            raise InvalidSpecError(f"tail must be 'analytic' or 'drop', got {self.tail!r}")
        if self.sides is not None:
            sides = tuple(float(s) for s in self.sides)
            if not sides:
                raise InvalidSpecError("explicit side list is empty")
            if not all(math.isfinite(s) and s > 0 for s in sides):
                raise InvalidSpecError("side lengths must be finite and strictly positive")
            object.__setattr__(self, "sides", sides)
            return
        if self.rule not in RULES:
            raise InvalidSpecError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.rule == "log_squared":
            if self.param is not None:
                raise InvalidSpecError("log_squared takes no parameter")
        else:
            if self.param is None or not math.isfinite(self.param):
                raise InvalidSpecError(f"{self.rule} needs a finite parameter")
            if self.rule == "power_law" and self.param <= 1:
                raise InvalidSpecError(
                    f"power_law exponent must exceed 1 (got {self.param}); "
                    "otherwise V_1 = sum l_j diverges and the box is not GB")
            if self.rule == "exponential" and self.param <= 0:
                raise InvalidSpecError(
                    f"exponential rate must be positive (got {self.param}); "
                    "otherwise V_1 diverges")
            object.__setattr__(self, "param", float(self.param))
        if self.j_cut is not None:
            if int(self.j_cut) != self.j_cut or self.j_cut < 1:
                raise InvalidSpecError("j_cut must be a positive integer or None")
            object.__setattr__(self, "j_cut", int(self.j_cut))

    # constructors ---------------------------------------------------------

    @classmethod
    def explicit(cls, sides) -> "BoxSpec":
        return cls(sides=tuple(sides))

    @classmethod
    def power_law(cls, alpha, j_cut=None, tail="analytic") -> "BoxSpec":
        return cls(rule="power_law", param=alpha, j_cut=j_cut, tail=tail)

    @classmethod
    def exponential(cls, c, j_cut=None, tail="analytic") -> "BoxSpec":
        return cls(rule="exponential", param=c, j_cut=j_cut, tail=tail)

    @classmethod
    def log_squared(cls, j_cut=None, tail="analytic") -> "BoxSpec":
        return cls(rule="log_squared", j_cut=j_cut, tail=tail)

    @property
    def is_finite(self) -> bool:
        return self.sides is not None or self.tail == "drop"

    def side_lengths(self, n: int) -> np.ndarray:
        """First ``n`` side lengths (all of them for explicit boxes)."""
        if self.sides is not None:
            return np.array(self.sides[:n])
        j = np.arange(1, n + 1, dtype=float)
        if self.rule == "power_law":
            return j ** -self.param
        if self.rule == "exponential":
            return np.exp(-self.param * j)
        i = j + 1.0
        return 1.0 / (i * np.log(i) ** 2)

    def tail_power_sum(self, J: int, p: int) -> float:
        """``sum_{j > J} l_j^p`` for a rule-generated box."""
        if self.rule == "power_law":
            return float(zeta(self.param * p, J + 1.0))
        if self.rule == "exponential":
            c = self.param * p
            return float(math.exp(-c * (J + 1)) / -math.expm1(-c))
        return _log_squared_tail(J + 2, p)

    def auto_j_cut(self, k_max: int) -> int:
        if self.sides is not None:
            return len(self.sides)
        if self.j_cut is not None:
            return self.j_cut
        if self.tail == "drop":
            return self._drop_j_cut()
        if self.rule == "exponential":
            return 0  # closed form, no head needed
        J = max(64, int(k_max))
        while True:
            p1 = self.tail_power_sum(J, 1)
            ratio = k_max * float(self.side_lengths(J + 1)[-1]) / p1
            if ratio <= TAIL_RATIO_MAX or J >= J_MAX:
                return J
            J *= 2

    def _drop_j_cut(self) -> int:
        if self.rule == "exponential":
            q = math.exp(-self.param)
            return max(1, math.ceil(math.log(DROP_TAIL_RTOL / (1 + DROP_TAIL_RTOL)) / math.log(q)))
        if self.rule == "power_law":
            a = self.param
            # integral bound J^(1-a)/(a-1) <= rtol * head, head >= 1
            need = (DROP_TAIL_RTOL * (a - 1.0)) ** (-1.0 / (a - 1.0))
            if need <= J_MAX:
                return max(1, math.ceil(need))
        raise InvalidSpecError(
            f"dropping the tail of {self.rule} to relative size {DROP_TAIL_RTOL:g} needs "
            f"more than {J_MAX} sides; use tail='analytic' or an explicit j_cut")

    def to_json_dict(self) -> dict:
        if self.sides is not None:
            return {"sides": list(self.sides)}
        return {"rule": self.rule, "param": self.param,
                "j_cut": "auto" if self.j_cut is None else self.j_cut, "tail": self.tail}

    @classmethod
    def from_json_dict(cls, d: dict) -> "BoxSpec":
        if "sides" in d:
            return cls(sides=tuple(d["sides"]))
        if "rule" not in d:
            raise InvalidSpecError("box JSON needs 'sides' or 'rule'")
        j_cut = d.get("j_cut", "auto")
        j_cut = None if j_cut in (None, "auto") else int(j_cut)
        return cls(rule=d["rule"], param=d.get("param"), j_cut=j_cut,
                   tail=d.get("tail", "analytic"))


def _log_squared_tail(a: int, p: int) -> float:
    """``sum_{i >= a} (i ln^2 i)^-p``.

    Terms below ``EM_START`` are summed directly; the rest by Euler-Maclaurin
    with two correction terms, whose remainder is then below 1e-18.
    """
    start = max(a, EM_START)
    i = np.arange(a, start, dtype=float)
    head = math.fsum((i * np.log(i) ** 2) ** -p) if i.size else 0.0
    a = start

    def f(x):
        return x ** -p * math.log(x) ** (-2 * p)

    def fprime(x):
        lx = math.log(x)
        return -p * x ** (-p - 1) * lx ** (-2 * p) * (1.0 + 2.0 / lx)

    if p == 1:
        integral = 1.0 / math.log(a)
    else:
        # substitute u = ln x
        integral, _ = integrate.quad(lambda u: math.exp((1 - p) * u) * u ** (-2 * p),
                                     math.log(a), np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return head + integral + 0.5 * f(a) - fprime(a) / 12.0


def log_esf(log_sides, k_max: int) -> np.ndarray:
    """Log elementary symmetric polynomials ``ln e_0 .. ln e_kmax``.

    Sequential multiplication by ``(1 + l z)``; every update is a sum of
    non-negative terms so nothing cancels.
    """
    out = np.full(k_max + 1, -np.inf)
    out[0] = 0.0
    for i, ll in enumerate(log_sides):
        top = min(i + 1, k_max)
        if top == 0:
            break
        out[1:top + 1] = np.logaddexp(out[1:top + 1], ll + out[:top])
    return out


def _log_tail_esf(power_sums, k_max: int):
    """Log elementary symmetric polynomials of a tail from its power sums.

    Uses Newton's recurrence ``k e_k = sum_i (-1)^(i+1) p_i e_{k-i}`` in the
    normalised variable ``u_k = e_k k! / p_1^k``; the alternating terms fall
    off geometrically when ``k * l_{J+1} << p_1``.  Returns the log values and
    the size of the largest neglected term relative to ``u_k``.
    """
    P = np.asarray(power_sums, dtype=float)
    p1 = P[1]
    m = P.size - 1
    ratios = np.zeros(m + 1)
    with np.errstate(under="ignore"):
        for i in range(1, m + 1):
            # p_i <= p_1^i, so the ratio never overflows
            ratios[i] = math.exp(math.log(P[i]) - i * math.log(p1)) if P[i] > 0 else 0.0
    u = np.zeros(k_max + 1)
    u[0] = 1.0
    worst = 0.0
    for k in range(1, k_max + 1):
        s = 0.0
        fall = 1.0
        last = 0.0
        for i in range(1, min(k, m) + 1):
            if i > 1:
                fall *= k - i + 1
            term = ratios[i] * fall * u[k - i]
            if term == 0.0:
                break
            s += term if i % 2 else -term
            last = term
            if term < 1e-18 * abs(s):
                break
        else:
            if k > m:
                worst = max(worst, last / abs(s))
        if not s > 0:
            raise InvalidSpecError("tail recurrence lost positivity; increase j_cut")
        u[k] = s
    k = np.arange(k_max + 1, dtype=float)
    return np.log(u) + k * math.log(p1) - gammaln(k + 1.0), worst


def box_volume_sequence(spec: BoxSpec, k_max: int) -> VolumeSequence:
    """Intrinsic volumes of a box, ``V_k = e_k(l_1, l_2, ...)``."""
    _index_range(k_max)
    k_max = int(k_max)

    if spec.sides is not None:
        sides = np.array(spec.sides)
        logv = log_esf(np.log(sides), k_max)
        return VolumeSequence(logv, "box", "exact finite box", 0.0, len(sides),
                              {"j_cut": len(sides)})

    if spec.rule == "exponential" and spec.tail == "analytic":
        logv = _exponential_box(spec.param, k_max)
        return VolumeSequence(logv, "box", "exact: q-product closed form, no truncation",
                              0.0, None, {"j_cut": None})

    J = spec.auto_j_cut(k_max)
    head = log_esf(np.log(spec.side_lengths(J)), k_max)

    if spec.tail == "drop":
        T = spec.tail_power_sum(J, 1)
        note = (f"finite truncation to J={J} sides; omitted tail sum T={T:.3e}; "
                "e_k(full) - e_k(trunc) <= T * e_{k-1}(full)")
        return VolumeSequence(head, "box", note, T, J, {"j_cut": J})

    P = [0.0] + [spec.tail_power_sum(J, p) for p in range(1, N_POWER_SUMS + 1)]
    ratio = k_max * float(spec.side_lengths(J + 1)[-1]) / P[1]
    if ratio > TAIL_RATIO_MAX:
        log.warning("tail recurrence ratio %.3g exceeds %.2g at J=%d; accuracy degrades",
                    ratio, TAIL_RATIO_MAX, J)
    tail, worst = _log_tail_esf(P, k_max)
    logv = _log_convolve(head, tail)
    rel = max(worst, 1e-16 * max(k_max, 1))
    note = (f"head J={J} sides multiplied exactly; tail j>{J} folded in from "
            f"{N_POWER_SUMS} power sums (recurrence ratio {ratio:.2e}); "
            f"relative error of V_k <= {rel:.1e}")
    return VolumeSequence(logv, "box", note, rel, None, {"j_cut": J})


def _exponential_box(c: float, k_max: int) -> np.ndarray:
    # Euler: prod_{j>=1} (1 + q^j z) = sum_k q^(k(k+1)/2) / prod_{i<=k} (1 - q^i) z^k
    k = np.arange(k_max + 1, dtype=float)
    denom = np.concatenate([[0.0], np.cumsum(np.log(-np.expm1(-c * k[1:])))])
    return -c * k * (k + 1) / 2.0 - denom


def _log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.size
    out = np.empty(n)
    for k in range(n):
        out[k] = np.logaddexp.reduce(a[: k + 1] + b[k::-1])
    out[0] = 0.0
    return out


# ---------------------------------------------------------------------------
# Validators and derived quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    first_failing_k: int | None
    worst_slack: float
    worst_k: int | None
    n_checked: int

    def to_json_dict(self):
        return {"passed": self.passed, "first_failing_k": self.first_failing_k,
                "worst_slack": self.worst_slack, "worst_k": self.worst_k,
                "n_checked": self.n_checked}


def _report(slack: np.ndarray, ks: np.ndarray, tol: float) -> ValidationReport:
    if slack.size == 0:
        return ValidationReport(True, None, math.inf, None, 0)
    bad = np.flatnonzero(slack < -tol)
    i = int(np.argmin(slack))
    return ValidationReport(bad.size == 0, int(ks[bad[0]]) if bad.size else None,
                            float(slack[i]), int(ks[i]), int(slack.size))


def validate_ulc(v: VolumeSequence, tol: float = LOG_SLACK) -> ValidationReport:
    """Check ``V_k^2 >= (k+1)/k V_{k+1} V_{k-1}`` for ``k >= 1`` in log form."""
    lv = v.logV
    if lv.size < 3:
        return _report(np.empty(0), np.empty(0, int), tol)
    k = np.arange(1, lv.size - 1)
    lo, mid, hi = lv[:-2], lv[1:-1], lv[2:]
    slack = np.full(k.size, np.inf)
    fin = np.isfinite(lo) & np.isfinite(mid) & np.isfinite(hi)
    slack[fin] = 2 * mid[fin] - hi[fin] - lo[fin] - np.log((k[fin] + 1.0) / k[fin])
    # V_k = 0 < V_{k+1} with V_{k-1} > 0 breaks the inequality outright.
    broken = np.isfinite(lo) & ~np.isfinite(mid) & np.isfinite(hi)
    slack[broken] = -np.inf
    checked = fin | broken
    return _report(slack[checked], k[checked], tol)


def validate_chevet(v: VolumeSequence, tol: float = LOG_SLACK) -> ValidationReport:
    """Check ``V_k <= V_1^k / k!`` for ``k >= 1``."""
    lv = v.logV
    if lv.size < 2:
        return _report(np.empty(0), np.empty(0, int), tol)
    k = np.arange(1, lv.size)
    bound = k * lv[1] - gammaln(k + 1.0)
    with np.errstate(invalid="ignore"):
        slack = np.where(np.isfinite(lv[1:]), bound - lv[1:], np.inf)
    return _report(slack, k, tol)


def mk_sequence(v: VolumeSequence) -> np.ndarray:
    """``m_k = (k+1) V_{k+1} / V_k`` for ``0 <= k < k_max``, with 0/0 := 0."""
    lv = v.logV
    lo, hi = lv[:-1], lv[1:]
    corrupt = ~np.isfinite(lo) & np.isfinite(hi)
    if np.any(corrupt):
        k = int(np.flatnonzero(corrupt)[0])
        raise InconsistentSequenceError(
            f"V_{k} = 0 but V_{k + 1} > 0; intrinsic volumes cannot resume after vanishing")
    k = np.arange(lo.size, dtype=float)
    out = np.zeros(lo.size)
    fin = np.isfinite(lo) & np.isfinite(hi)
    out[fin] = (k[fin] + 1.0) * np.exp(hi[fin] - lo[fin])
    return out


def log_mk_sequence(v: VolumeSequence) -> np.ndarray:
    """``ln m_k``, with ``-inf`` where ``m_k = 0``; avoids underflow of m_k."""
    mk_sequence(v)  # consistency check
    lv = v.logV
    k = np.arange(lv.size - 1, dtype=float)
    out = np.full(k.size, -np.inf)
    fin = np.isfinite(lv[:-1]) & np.isfinite(lv[1:])
    out[fin] = np.log(k[fin] + 1.0) + lv[1:][fin] - lv[:-1][fin]
    return out


def wills(v: VolumeSequence) -> float:
    """Wills functional ``W = sum V_k`` over the computed range."""
    lv = v.logV[np.isfinite(v.logV)]
    total = float(np.exp(np.logaddexp.reduce(lv)))
    if v.k_max >= 1 and np.isfinite(v.logV[1]):
        bound = math.exp(math.exp(v.logV[1]))
        if total > bound * (1 + LOG_SLACK):
            log.warning("W = %.6g exceeds exp(V_1) = %.6g; sequence violates the Chevet bound",
                        total, bound)
    return total


def wills_tail_bound(v: VolumeSequence) -> float:
    """Chevet bound on the omitted ``sum_{k > k_max} V_1^k / k!``."""
    if v.terminates:
        return 0.0
    if v.k_max == 0:
        return math.inf
    return chevet_tail(math.exp(v.logV[1]), v.k_max)


def chevet_tail(x: float, n: int) -> float:
    """``sum_{k > n} x^k / k!`` without overflow or underflow."""
    if x <= 0:
        return 0.0
    if x < 0.5 * (n + 2):
        lead = (n + 1) * math.log(x) - gammaln(n + 2.0)
        return math.exp(lead) / (1.0 - x / (n + 2))
    g = float(gammainc(n + 1, x))
    if g == 0.0:
        return 0.0
    lt = x + math.log(g)
    return math.exp(lt) if lt < 709.0 else math.inf
