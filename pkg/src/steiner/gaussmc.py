"""Seeded Monte Carlo checks of the Gaussian identities for finite boxes.

For a box ``K = prod [0, l_j]`` all three identities reduce to closed forms
that can be sampled cheaply:

* the Steiner tube volume ``vol(K + lambda B)``, by rejection on the
  enclosing box;
* the Wills functional as a Gaussian tube integral, by importance sampling;
* ``E exp(sup_t [sqrt(2 pi) lambda xi(t) - pi lambda^2 |t|^2]) = f_K(lambda)``,
  where the supremum separates over coordinates.

Sampling is sharded deterministically.  Worker ``w`` of ``W`` owns the sample
indices ``i = w (mod W)`` and draws them from its own child of
``SeedSequence(seed)``, so the estimate does not depend on thread scheduling.
Partial sums are correctly rounded (``math.fsum``) and combined in worker
order.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .volseq import VolumeSequence, log_kappa

__all__ = [
    "MCEstimate",
    "dist_to_box",
    "steiner_polynomial_value",
    "tube_volume_mc",
    "wills_mc",
    "tsirelson_mc",
    "default_proposal_scale",
    "MIN_SAMPLES",
]

log = logging.getLogger(__name__)

MIN_SAMPLES = 1000
CHUNK = 1 << 16
ESS_FRACTION = 0.01
METHODS = ("tube", "wills", "tsirelson")


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int
    method: str
    lam: float | None = None
    workers: int = 1
    ess: float | None = None

    def to_json_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n_samples,
                "seed": self.seed, "method": self.method, "lambda": self.lam}


def _sides(sides, allow_zero: bool = False) -> np.ndarray:
    s = np.asarray(sides, dtype=float).ravel()
    if s.size == 0:
        raise InvalidInputError("a box needs at least one side")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("side lengths must be finite")
    if allow_zero:
        if np.any(s < 0):
            raise InvalidInputError("side lengths must be non-negative")
    elif np.any(s <= 0):
        raise InvalidInputError("side lengths must be positive")
    return s


def _check_n(n) -> int:
    if int(n) != n or n < MIN_SAMPLES:
        raise InvalidInputError(f"need an integer sample count >= {MIN_SAMPLES}, got {n}")
    return int(n)


def _check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise InvalidInputError("seed must be an integer in [0, 2**64)")
    return int(seed)


def dist_to_box(x, sides) -> np.ndarray:
    """Euclidean distance from ``x`` to ``prod [0, l_j]``.

    ``x`` may be a single point of shape ``(d,)`` or a batch ``(n, d)``.
    Degenerate sides ``l_j = 0`` are allowed.
    """
    s = _sides(sides, allow_zero=True)
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != s.shape:
        raise InvalidInputError(f"point dimension {x.shape[-1:]} does not match {s.size} sides")
    clamp = np.maximum(np.maximum(x - s, 0.0), -x)
    return np.sqrt(np.einsum("...j,...j->...", clamp, clamp))


def steiner_polynomial_value(v: VolumeSequence, d: int, lam: float) -> float:
    """Volume of the ``lam``-neighbourhood of a body in ``R^d``.

    Evaluates ``sum_k kappa_{d-k} V_k lam^(d-k)`` for ``k = 0..d``.
    """
    dim = v.dimension if v.dimension is not None else (v.last_finite if v.terminates else None)
    if dim is None:
        raise InvalidInputError("the Steiner polynomial needs a finite-dimensional sequence")
    if dim > d:
        raise InvalidInputError(f"sequence has dimension {dim} > d = {d}")
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    k = np.arange(min(d, v.k_max) + 1)
    logv = v.logV[k]
    if lam == 0:
        return float(np.exp(v.logV[d])) if d <= v.k_max else 0.0
    with np.errstate(divide="ignore"):
        terms = logv + log_kappa(d - k) + (d - k) * math.log(lam)
    return math.fsum(np.exp(terms[np.isfinite(terms)]))


def _shard_counts(n: int, workers: int) -> list[int]:
    return [len(range(w, n, workers)) for w in range(workers)]


def _run_sharded(kernel, n: int, seed: int, workers: int):
    """Run ``kernel(rng, m) -> array`` over the shards, in worker order."""
    if int(workers) != workers or workers < 1:
        raise InvalidInputError("workers must be a positive integer")
    counts = _shard_counts(n, workers)
    children = np.random.SeedSequence(seed).spawn(workers)

    def work(w):
        rng = np.random.Generator(np.random.Philox(children[w]))
        parts = []
        left = counts[w]
        while left > 0:
            m = min(CHUNK, left)
            parts.append(np.asarray(kernel(rng, m), dtype=float))
            left -= m
        return np.concatenate(parts) if parts else np.empty(0)

    if workers == 1:
        shards = [work(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            shards = list(ex.map(work, range(workers)))
    return shards


def _mean_stderr(shards, n: int) -> tuple[float, float, float]:
    total = math.fsum(math.fsum(s) for s in shards)
    mean = total / n
    ss = math.fsum(math.fsum((s - mean) ** 2) for s in shards)
    sumsq = math.fsum(math.fsum(s * s) for s in shards)
    var = ss / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n), sumsq


def tube_volume_mc(sides, lam: float, n: int = 10**6, seed: int = 0,
                   workers: int = 1) -> MCEstimate:
    """Hit-or-miss estimate of ``vol(K + lam B)`` for a box ``K``."""
    s = _sides(sides, allow_zero=True)
    n, seed = _check_n(n), _check_seed(seed)
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    lo, hi = -lam * np.ones_like(s), s + lam
    bbox = float(np.prod(hi - lo))

    def kernel(rng, m):
        x = lo + (hi - lo) * rng.random((m, s.size))
        return dist_to_box(x, s) <= lam

    shards = _run_sharded(kernel, n, seed, workers)
    hits = sum(int(np.count_nonzero(sh)) for sh in shards)
    p = hits / n
    return MCEstimate(value=p * bbox, stderr=bbox * math.sqrt(p * (1 - p) / n),
                      n_samples=n, seed=seed, method="tube", lam=float(lam), workers=workers)


def default_proposal_scale(sides) -> float:
    return float(np.max(sides)) / 2 + 3.0


def wills_mc(sides, n: int = 10**6, seed: int = 0, proposal_scale: float | None = None,
             workers: int = 1) -> MCEstimate:
    """Importance-sampling estimate of the Wills functional ``W(K)``.

    With intrinsic volumes normalised so that ``V_1`` of a segment is its
    length, ``W(K) = int (2 pi)^(-d/2) exp(-dist(x, L)^2 / 2) dx`` holds for
    the dilate ``L = sqrt(2 pi) K`` (equivalently ``int exp(-pi dist(x, K)^2)``).
    Sampling runs in the dilated coordinates, where the Gaussian collar has
    unit width.  The proposal is ``N(c, s^2 I)`` centred at the box centre;
    ``proposal_scale`` is ``s`` in those coordinates.  A warning is issued
    when the effective sample size drops below ``n / 100``.
    """
    s = math.sqrt(2 * math.pi) * _sides(sides, allow_zero=True)
    n, seed = _check_n(n), _check_seed(seed)
    scale = default_proposal_scale(s) if proposal_scale is None else float(proposal_scale)
    if not scale > 0 or not math.isfinite(scale):
        raise InvalidInputError("proposal_scale must be positive")
    d = s.size
    centre = s / 2
    # log of (2 pi)^(-d/2) / q(x), up to the x-dependent exponents
    log_ratio = d * math.log(scale)

    def kernel(rng, m):
        y = rng.standard_normal((m, d))
        x = centre + scale * y
        r = dist_to_box(x, s)
        return np.exp(log_ratio - 0.5 * r * r + 0.5 * np.einsum("ij,ij->i", y, y))

    shards = _run_sharded(kernel, n, seed, workers)
    mean, se, sumsq = _mean_stderr(shards, n)
    ess = (mean * n) ** 2 / sumsq if sumsq > 0 else 0.0
    if ess < ESS_FRACTION * n:
        warnings.warn(f"effective sample size {ess:.0f} < n/100; proposal_scale {scale} "
                      "is probably too narrow", RuntimeWarning, stacklevel=2)
    return MCEstimate(value=mean, stderr=se, n_samples=n, seed=seed, method="wills",
                      lam=None, workers=workers, ess=ess)


def _tsirelson_log_integrand(g: np.ndarray, s: np.ndarray, lam: float) -> np.ndarray:
    a = math.sqrt(2 * math.pi) * lam * g
    b = math.pi * lam * lam
    t = np.clip(a / (2 * b), 0.0, s)
    return np.sum(a * t - b * t * t, axis=-1)


def tsirelson_mc(sides, lam: float, n: int = 10**6, seed: int = 0,
                 workers: int = 1) -> MCEstimate:
    """Estimate ``E exp(sup_t [sqrt(2 pi) lam xi(t) - pi lam^2 |t|^2])`` over a box.

    Uses antithetic pairs ``(N, -N)``: ``n // 2`` pair means are averaged and
    the standard error is taken over pairs.
    """
    s = _sides(sides, allow_zero=True)
    n, seed = _check_n(n), _check_seed(seed)
    if lam < 0 or not math.isfinite(lam):
        raise InvalidInputError("lambda must be non-negative")
    if lam == 0:
        return MCEstimate(1.0, 0.0, n, seed, "tsirelson", 0.0, workers)
    pairs = n // 2

    def kernel(rng, m):
        g = rng.standard_normal((m, s.size))
        return 0.5 * (np.exp(_tsirelson_log_integrand(g, s, lam))
                      + np.exp(_tsirelson_log_integrand(-g, s, lam)))

    shards = _run_sharded(kernel, pairs, seed, workers)
    mean, se, _ = _mean_stderr(shards, pairs)
    return MCEstimate(value=mean, stderr=se, n_samples=2 * pairs, seed=seed,
                      method="tsirelson", lam=float(lam), workers=workers)
