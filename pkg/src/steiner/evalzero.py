"""Evaluation and zeros of (truncated) Steiner entire functions.

``f_K(z) = sum_k V_k z^k``.  Coefficients of the model families span
thousands of orders of magnitude, so sums are formed per evaluation point
relative to the largest term ``max_k V_k |z|^k`` and only exponentiated at
the end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import volseq
from .errors import InvalidInputError, NonConvergenceError
from .volseq import BoxSpec, VolumeSequence

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
ARTIFACT_RTOL = 1e-8
RELIABLE_RTOL = 1e-3
_CHUNK = 1 << 22


@dataclass(frozen=True)
class TruncatedSteinerFunction:
    """Degree-N Taylor truncation ``sum_{k<=N} V_k z^k`` in log form.

    ``complete`` is True when nothing was cut off (a terminating sequence
    kept in full), so the truncation *is* the Steiner function.
    """

    logc: np.ndarray
    scale_radius: float
    complete: bool
    log_v1: float

    def __post_init__(self):
        arr = np.array(self.logc, dtype=float)
        if arr[0] != 0.0:
            raise InvalidInputError("leading coefficient must be V_0 = 1")
        arr.setflags(write=False)
        object.__setattr__(self, "logc", arr)

    @property
    def degree(self) -> int:
        return self.logc.size - 1

    @property
    def coefficients(self) -> np.ndarray:
        return np.exp(self.logc)

    def __call__(self, z):
        return eval_series(self, z).value


def build_function(v: VolumeSequence, degree: int | None = None) -> TruncatedSteinerFunction:
    degree = v.k_max if degree is None else int(degree)
    if degree < 0 or degree > v.k_max:
        raise InvalidInputError(f"degree {degree} outside [0, {v.k_max}]")
    N = min(degree, v.last_finite)
    logc = v.logV[: N + 1]
    complete = (v.terminates and N == v.last_finite) or \
        (v.dimension is not None and N == v.dimension)
    r = math.exp(-logc[N] / N) if N >= 1 else 1.0
    log_v1 = float(v.logV[1]) if v.k_max >= 1 else -math.inf
    return TruncatedSteinerFunction(logc, r, complete, log_v1)


# ---------------------------------------------------------------------------
# Scaled summation
# ---------------------------------------------------------------------------


def _scaled_sums(logc: np.ndarray, z: np.ndarray):
    """Return ``M, S0, S1, A`` with ``p(z) = e^M S0``, ``z p'(z) = e^M S1`` and
    ``sum |c_k z^k| = e^M A``; ``z`` must be non-zero."""
    z = np.asarray(z, dtype=complex).ravel()
    n = logc.size
    k = np.arange(n, dtype=float)
    out_M = np.empty(z.size)
    out_S0 = np.empty(z.size, dtype=complex)
    out_S1 = np.empty(z.size, dtype=complex)
    out_A = np.empty(z.size)
    step = max(1, _CHUNK // n)
    finite = np.isfinite(logc)
    lc = np.where(finite, logc, -np.inf)
    for s in range(0, z.size, step):
        zz = z[s:s + step]
        L = np.log(np.abs(zz))
        T = lc[None, :] + k[None, :] * L[:, None]
        M = T.max(axis=1)
        t = np.exp(T - M[:, None])
        U = np.exp(1j * np.outer(np.angle(zz), k))
        tU = t * U
        out_M[s:s + step] = M
        out_S0[s:s + step] = tU.sum(axis=1)
        out_S1[s:s + step] = tU @ k
        out_A[s:s + step] = t.sum(axis=1)
    return out_M, out_S0, out_S1, out_A


@dataclass(frozen=True)
class SeriesValue:
    value: complex | np.ndarray
    tail_bound: float | np.ndarray
    degree_too_low: bool | np.ndarray


def tail_bound(f: TruncatedSteinerFunction, radius, method: str = "chevet"):
    """Bound on ``sum_{k>N} V_k R^k`` for the part the truncation dropped.

    ``chevet`` uses ``V_k <= V_1^k/k!``; ``ulc`` uses that m_k is
    non-increasing, which is much sharper but presumes ultra-log-concavity.
    """
    R = np.asarray(radius, dtype=float)
    if f.complete:
        return np.zeros_like(R) if R.ndim else 0.0
    if method == "chevet":
        if not np.isfinite(f.log_v1):
            return np.zeros_like(R) if R.ndim else 0.0
        v1 = math.exp(f.log_v1)
        out = np.vectorize(lambda r: volseq.chevet_tail(v1 * r, f.degree))(R)
        return float(out) if out.ndim == 0 else out
    if method == "ulc":
        N = f.degree
        if N < 1:
            return tail_bound(f, R, "chevet")
        m_last = N * math.exp(f.logc[N] - f.logc[N - 1])
        q = m_last * R / (N + 1)
        with np.errstate(divide="ignore", over="ignore"):
            lead = f.logc[N] + N * np.log(np.maximum(R, 1e-300))
            out = np.where(q < 1, np.exp(lead) * q / np.maximum(1 - q, 1e-300), np.inf)
        return float(out) if out.ndim == 0 else out
    raise InvalidInputError(f"unknown tail-bound method {method!r}")


def eval_series(f: TruncatedSteinerFunction, z) -> SeriesValue:
    """Evaluate the truncation at ``z`` (scalar or array) with a Chevet tail bound."""
    zarr = np.asarray(z, dtype=complex)
    flat = zarr.ravel()
    vals = np.ones(flat.size, dtype=complex)
    nz = flat != 0
    if np.any(nz) and f.degree > 0:
        M, S0, _, _ = _scaled_sums(f.logc, flat[nz])
        with np.errstate(over="ignore"):
            vals[nz] = np.exp(M) * S0
    tb = np.asarray(tail_bound(f, np.abs(flat)), dtype=float).reshape(flat.shape)
    low = tb > 0.1 * np.abs(vals)
    if zarr.ndim == 0:
        return SeriesValue(complex(vals[0]), float(tb[0]), bool(low[0]))
    return SeriesValue(vals.reshape(zarr.shape), tb.reshape(zarr.shape), low.reshape(zarr.shape))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductValue:
    value: complex
    tail_bound: float
    j_cut: int


def eval_box_product(spec: BoxSpec, z: complex, j_cut: int | None = None) -> ProductValue:
    """``prod_j (1 + l_j z)`` summed in log form.

    Rule boxes multiply sides until ``l_j |z| <= 1/2``; with an analytic tail
    the rest enters through ``sum_p (-1)^(p+1) p_p z^p / p``, otherwise it is
    dropped and bounded by ``exp(|z| T) - 1`` relative.
    """
    z = complex(z)
    if spec.sides is not None:
        s = np.array(spec.sides)
        with np.errstate(divide="ignore"):
            logp = np.sum(np.log1p(s * z))
        return ProductValue(complex(np.exp(logp)), 0.0, s.size)
    if j_cut is None:
        J = spec.j_cut if spec.j_cut is not None else 64
        if spec.tail == "drop":
            J = spec.auto_j_cut(0)
        while spec.tail == "analytic" and spec.side_lengths(J + 1)[-1] * abs(z) > 0.5:
            J *= 2
    else:
        J = int(j_cut)
    logp = complex(np.sum(np.log1p(spec.side_lengths(J) * z)))
    if spec.tail == "drop":
        T = spec.tail_power_sum(J, 1)
        val = complex(np.exp(logp))
        return ProductValue(val, abs(val) * math.expm1(abs(z) * T), J)
    terms = []
    zp = 1.0 + 0j
    for p in range(1, volseq.N_POWER_SUMS + 1):
        zp *= z
        P = spec.tail_power_sum(J, p)
        if P == 0.0:
            break
        terms.append((1 if p % 2 else -1) * P * zp / p)
        if abs(terms[-1]) < 1e-18 * max(1.0, abs(logp)):
            break
    logp += complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    return ProductValue(complex(np.exp(logp)), 0.0, J)


def _hyper0f2_scalar(a, b, z, max_terms=100_000, quiet=30):
    term = 1.0 + 0j
    re, im = [1.0], [0.0]
    total = 1.0 + 0j
    small = 0
    for k in range(max_terms):
        term *= z / ((a + k) * (b + k) * (k + 1))
        total += term
        re.append(term.real)
        im.append(term.imag)
        if abs(term) < 1e-17 * abs(total):
            small += 1
            if small >= quiet:
                return complex(math.fsum(re), math.fsum(im))
        else:
            small = 0
    raise NonConvergenceError(f"0F2({a}, {b}; {z}) did not converge in {max_terms} terms",
                              partial=complex(math.fsum(re), math.fsum(im)))


def hyper0F2(alpha: float, beta: float, z):
    """Generalised hypergeometric ``0F2(alpha, beta; z) = sum z^k / ((alpha)_k (beta)_k k!)``."""
    for p in (alpha, beta):
        if p <= 0 and float(p).is_integer():
            raise InvalidInputError(f"0F2 parameter {p} is a non-positive integer")
    zarr = np.asarray(z, dtype=complex)
    if zarr.ndim == 0:
        return _hyper0f2_scalar(alpha, beta, complex(zarr))
    out = np.array([_hyper0f2_scalar(alpha, beta, complex(x)) for x in zarr.ravel()])
    return out.reshape(zarr.shape)


def spiral_closed_form(z):
    """Steiner function of the Wiener spiral hull via two 0F2 terms."""
    z = np.asarray(z, dtype=complex)
    x = math.pi * z ** 2 / 4
    return hyper0F2(0.5, 1.0, x) + 2 * z * hyper0F2(1.5, 1.5, x)


def bridge_closed_form(z):
    """Steiner function of the Wiener spiral bridge hull via two 0F2 terms."""
    z = np.asarray(z, dtype=complex)
    x = math.pi * z ** 2 / 4
    return hyper0F2(0.5, 1.5, x) + 0.5 * math.pi * z * hyper0F2(1.5, 2.0, x)


# ---------------------------------------------------------------------------
# Zeros
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroSet:
    """Zeros sorted by modulus.

    ``error_estimate`` is the first-order relative forward error
    ``cond * delta``, with ``delta`` the relative accuracy of the stored
    coefficients; zeros of high-degree polynomials with clustered real roots
    can be ill-conditioned far beyond double precision.
    """

    zeros: np.ndarray
    residuals: np.ndarray
    multiple: np.ndarray
    artifact: np.ndarray
    reliable_radius: float
    error_estimate: np.ndarray
    iterations: int = 0

    def __len__(self):
        return self.zeros.size

    @property
    def reliable(self) -> np.ndarray:
        return ~self.artifact & (self.error_estimate <= RELIABLE_RTOL)

    def to_json_list(self) -> list[dict]:
        return [{"re": float(z.real), "im": float(z.imag), "residual": float(r),
                 "artifact_flag": bool(a), "multiple": bool(m), "error_estimate": float(e)}
                for z, r, a, m, e in zip(self.zeros, self.residuals, self.artifact,
                                         self.multiple, self.error_estimate)]


def box_zeros(spec: BoxSpec, j_cut: int | None = None) -> ZeroSet:
    """Exact zeros ``-1/l_j`` of a (truncated) box product."""
    J = len(spec.sides) if spec.sides is not None else (j_cut or spec.j_cut)
    if J is None:
        raise InvalidInputError("rule boxes need a j_cut for a finite zero set")
    z = np.sort(-1.0 / spec.side_lengths(J))[::-1].astype(complex)
    n = z.size
    zero = np.zeros(n)
    return ZeroSet(z, zero, np.zeros(n, dtype=bool), np.zeros(n, dtype=bool), math.inf, zero)


def _initial_guesses(lb: np.ndarray) -> np.ndarray:
    """Moduli from the upper convex hull (Newton polygon) of ``(k, ln b_k)``."""
    N = lb.size - 1
    hull = [0]
    for k in range(1, N + 1):
        while len(hull) >= 2:
            k1, k2 = hull[-2], hull[-1]
            if (lb[k2] - lb[k1]) * (k - k1) <= (lb[k] - lb[k1]) * (k2 - k1):
                hull.pop()
            else:
                break
        hull.append(k)
    out = []
    sigma = 0.7
    for a, b in zip(hull[:-1], hull[1:]):
        n = b - a
        R = math.exp((lb[a] - lb[b]) / n)
        ang = 2 * math.pi * np.arange(n) / n + 2 * math.pi * a / N + sigma
        out.append(R * np.exp(1j * ang))
    return np.concatenate(out)


def _aberth(lb: np.ndarray, max_iter: int):
    N = lb.size - 1
    # coefficients stored as logs carry relative error ~ eps * |ln b_k|
    delta = EPS * (1.0 + float(np.abs(lb).max()))
    z = _initial_guesses(lb)
    active = np.ones(N, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        _, S0, S1, A = _scaled_sums(lb, z[idx])
        S1 = np.where(S1 == 0, EPS * A, S1)
        newton = z[idx] * S0 / S1
        diff = z[idx, None] - z[None, :]
        diff[np.arange(idx.size), idx] = np.inf
        rep = (1.0 / diff).sum(axis=1)
        w = newton / (1.0 - newton * rep)
        small = np.abs(S0) <= 4 * delta * A
        z[idx] -= np.where(small, 0.0, w)
        # a stalled step alone is not enough: near a neighbour's root the
        # Aberth correction can vanish while the residual is still large
        stalled = (np.abs(w) <= 4 * EPS * np.abs(z[idx])) & (np.abs(S0) <= 1e4 * delta * A)
        done = small | stalled
        active[idx[done]] = False
    return z, active, it


def find_zeros(f: TruncatedSteinerFunction, max_iter: int = 500, tol: float = 1e-10) -> ZeroSet:
    """All zeros of the truncated polynomial (Aberth-Ehrlich, Newton-polished).

    Works on the balanced variable ``w = z / scale_radius``.  Zeros outside
    the radius where the dropped tail is negligible are flagged as truncation
    artifacts.
    """
    N = f.degree
    if N < 1:
        raise InvalidInputError("find_zeros needs degree >= 1")
    r = f.scale_radius
    lb = f.logc + np.arange(N + 1) * math.log(r)
    w, active, iters = _aberth(lb, max_iter)

    # Newton polish, keeping a step only when it lowers the backward error
    for _ in range(2):
        _, S0, S1, A = _scaled_sums(lb, w)
        ok = S1 != 0
        cand = w.copy()
        cand[ok] -= w[ok] * S0[ok] / S1[ok]
        _, T0, _, B = _scaled_sums(lb, cand)
        better = np.abs(T0) / B < np.abs(S0) / A
        w = np.where(better, cand, w)
    _, S0, S1, A = _scaled_sums(lb, w)
    resid = np.abs(S0) / A
    delta = EPS * (1.0 + float(np.abs(f.logc).max()))
    with np.errstate(divide="ignore"):
        err_est = np.where(S1 != 0, A / np.abs(S1), np.inf) * delta

    z = w * r
    order = np.argsort(np.abs(z), kind="stable")
    z, resid, err_est = z[order], resid[order], err_est[order]
    # tidy conjugate symmetry noise on real zeros
    z = np.where(np.abs(z.imag) <= 1e3 * EPS * np.abs(z), z.real + 0j, z)

    multiple = np.zeros(N, dtype=bool)
    if N > 1:
        d = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(d, np.inf)
        multiple = d.min(axis=1) < 1e-6 * np.abs(z)

    artifact, radius = _artifact_flags(f, z)
    if not f.complete:
        # the dropped tail moves a zero by about cond * tail / A as well
        err_est = err_est / delta * (delta + np.exp(_log_rel_tail(f, np.abs(z))))
    zs = ZeroSet(z, resid, multiple, artifact, radius, err_est, iters)
    if np.any(resid > tol):
        raise NonConvergenceError(
            f"{int(np.sum(resid > tol))} of {N} zeros have residual above {tol:g} "
            f"after {iters} iterations", partial=zs)
    return zs


def _log_abs_scale(f, R):
    """``ln sum_k V_k R^k`` for radii ``R > 0``."""
    M, _, _, A = _scaled_sums(f.logc, np.asarray(R, dtype=complex))
    return M + np.log(A)


def _log_rel_tail(f, R):
    """``ln(tail(R) / sum_k V_k R^k)``, the truncation error relative to the majorant."""
    R = np.atleast_1d(np.asarray(R, dtype=float))
    tb = np.minimum(tail_bound(f, R, "chevet"), tail_bound(f, R, "ulc"))
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(tb, 1e-300)) - _log_abs_scale(f, R)


def _artifact_flags(f, z):
    if f.complete:
        return np.zeros(z.size, dtype=bool), math.inf
    R = np.abs(z)

    def bad(radius):
        return _log_rel_tail(f, radius) > math.log(ARTIFACT_RTOL)

    flags = bad(R)
    # bisection for the reliable radius on a log scale
    lo, hi = 1e-3, max(float(R.max()) * 4, 1.0)
    if not bad(hi)[0]:
        return flags, math.inf
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if bad(mid)[0]:
            hi = mid
        else:
            lo = mid
    return flags, lo


@dataclass(frozen=True)
class ExponentEstimate:
    exponent: float
    stderr: float
    window: tuple[int, int]
    ill_conditioned: bool


def convergence_exponent(zs: ZeroSet, window=None, reliable_only: bool = True,
                         min_zeros: int = 10) -> ExponentEstimate:
    """Slope of ``ln n`` against ``ln |z_n|`` over zeros sorted by modulus.

    ``window`` is a 1-based inclusive index range.  By default truncation
    artifacts and zeros whose error estimate exceeds ``RELIABLE_RTOL`` are
    left out of the fit (they keep their index ``n``).
    """
    mods = np.abs(zs.zeros)
    keep = zs.reliable.copy() if reliable_only else np.ones(mods.size, dtype=bool)
    n_all = np.arange(1, mods.size + 1)
    if window is not None:
        lo, hi = int(window[0]), int(window[1])
        if lo < 1 or hi > mods.size or lo > hi:
            raise InvalidInputError(f"zero window [{lo}, {hi}] outside [1, {mods.size}]")
        keep &= (n_all >= lo) & (n_all <= hi)
    n, m = n_all[keep], mods[keep]
    if n.size < min_zeros:
        raise InvalidInputError(f"need at least {min_zeros} zeros, have {n.size}")
    x = np.log(m)
    ill = bool(np.all(m <= 1 + 1e-6))
    if ill:
        log.warning("all zeros in the window lie in |z| <= 1: exponent is ill-conditioned")
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(n), rcond=None)
    resid = np.log(n) - A @ coef
    dof = max(n.size - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(float(resid @ resid) / dof / sxx) if sxx > 0 else math.inf
    return ExponentEstimate(float(coef[0]), se, (int(n[0]), int(n[-1])), ill)


# ---------------------------------------------------------------------------
# Hadamard product
# ---------------------------------------------------------------------------


def hadamard_reconstruct(zs, c: complex = 0.0):
    """``z -> exp(c z) prod_j (1 - z / z_j)`` from a zero set (or raw array)."""
    zeros = np.asarray(zs.zeros if isinstance(zs, ZeroSet) else zs, dtype=complex)

    def g(z):
        zz = np.asarray(z, dtype=complex)
        flat = zz.ravel()
        if zeros.size:
            with np.errstate(divide="ignore"):
                s = np.log(1.0 - flat[:, None] / zeros[None, :]).sum(axis=1)
        else:
            s = np.zeros(flat.size, dtype=complex)
        out = np.exp(c * flat + s)
        return complex(out[0]) if zz.ndim == 0 else out.reshape(zz.shape)

    return g


@dataclass(frozen=True)
class Comparison:
    max_rel_deviation: float
    n_compared: int
    skipped: tuple


def compare(f, reconstruction, points, zeros=None, atol: float = 1e-300) -> Comparison:
    """Largest ``|f - g| / |f|`` over ``points``, skipping zeros of ``f``."""
    pts = np.asarray(points, dtype=complex).ravel()
    fv = np.asarray(f(pts) if not isinstance(f, TruncatedSteinerFunction)
                    else eval_series(f, pts).value, dtype=complex)
    gv = np.asarray(reconstruction(pts), dtype=complex)
    skip = np.abs(fv) <= atol
    if zeros is not None:
        zarr = np.asarray(zeros.zeros if isinstance(zeros, ZeroSet) else zeros)
        if zarr.size:
            skip |= np.any(pts[:, None] == zarr[None, :], axis=1)
    dev = np.abs(fv - gv)[~skip] / np.abs(fv)[~skip]
    return Comparison(float(dev.max()) if dev.size else 0.0, int(dev.size),
                      tuple(complex(p) for p in pts[skip]))
