"""Unbiased stochastic gradient estimators and shot allocation.

Estimators follow a common contract: given a measurement model, an
evaluation point, a shot budget S and a caller-owned random generator they
return a ``GradientEstimate`` whose mean is unbiased for the derivative and
whose stderr comes from the unbiased sample variance.  All sampling is
vectorized but consumes the generator in a fixed documented order, so a
given (seed, parameters) pair reproduces the estimate bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytic import zigzag_cdf, zigzag_weight, KernelSpec, kernel_lambda, kernel_weights
from .errors import (DegenerateRuleError, InsufficientShotsError,
                     InvalidArgumentError, InvalidRuleError, NumericFailureError)
from .linsys import ShiftRule
from .specfun import MeasurementModel, sample_measurement_batch
from .spectrum import FrequencySet

_INF = float("inf")


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotPlan:
    """Per-shift shot counts for a deterministic rule evaluation."""

    shifts: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.shifts) != len(self.counts):
            raise InvalidArgumentError("plan shifts and counts differ in length")
        if any(c < 0 for c in self.counts):
            raise InvalidArgumentError("shot counts must be >= 0")

    @property
    def total(self) -> int:
        return int(sum(self.counts))


@dataclass(frozen=True)
class GradientEstimate:
    """Estimator output: mean, empirical standard error and the shots spent."""

    mean: float
    stderr: float
    shots_used: int
    method: str
    plan: ShotPlan | None = None

    def __post_init__(self):
        if self.shots_used <= 0:
            raise InvalidArgumentError("shots_used must be positive")
        if self.stderr < 0:
            raise InvalidArgumentError("stderr must be >= 0")

    def to_json_dict(self, seed: int | None = None) -> dict:
        data = {"mean": self.mean, "stderr": self.stderr,
                "shots": self.shots_used, "method": self.method}
        if seed is not None:
            data["seed"] = seed
        return data

    def to_json(self, seed: int | None = None) -> str:
        return json.dumps(self.to_json_dict(seed))


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (+inf sentinel below 2 samples)."""
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, _INF
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def sample_discrete(probabilities, u: float) -> int:
    """Index t with cum_{t} <= u < cum_{t+1} for the cumulative distribution."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < -1e-12):
        raise InvalidArgumentError("probabilities must be a nonnegative vector")
    if abs(float(np.sum(p)) - 1.0) > 1e-9:
        raise InvalidArgumentError("probabilities must sum to one")
    if not 0.0 <= u < 1.0:
        raise InvalidArgumentError("u must lie in [0, 1)")
    cum = np.cumsum(p)
    return int(min(np.searchsorted(cum, u, side="right"), p.size - 1))


def sample_inverse_cdf(cdf: Callable[[float], float], u: float,
                       initial_bracket: tuple[float, float] = (-1.0, 1.0)
                       ) -> float:
    """Invert a monotone CDF by bracket doubling plus bisection.

    Returns a point whose CDF value is within 1e-10 of ``u``; raises after
    200 failed bracket doublings.
    """
    if not 0.0 <= u <= 1.0:
        raise InvalidArgumentError("u must lie in [0, 1]")
    lo, hi = float(initial_bracket[0]), float(initial_bracket[1])
    if not lo < hi:
        raise InvalidArgumentError("invalid initial bracket")
    for _ in range(200):
        if cdf(lo) <= u:
            break
        lo = lo * 2 if lo < 0 else -abs(hi)
    else:
        raise NumericFailureError("bracket expansion failed on the left")
    for _ in range(200):
        if cdf(hi) >= u:
            break
        hi = hi * 2 if hi > 0 else abs(lo)
    else:
        raise NumericFailureError("bracket expansion failed on the right")
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        val = cdf(mid)
        if abs(val - u) < 1e-10:
            return mid
        if val < u:
            lo = mid
        else:
            hi = mid
    raise NumericFailureError("bisection failed to meet the CDF tolerance")


@dataclass(frozen=True)
class DiscreteShiftDistribution:
    """Normalized distribution over a finite set of shifts."""

    shifts: tuple[float, ...]
    probabilities: tuple[float, ...]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cum = np.cumsum(self.probabilities)
        idx = np.minimum(np.searchsorted(cum, rng.random(size), side="right"),
                         len(self.shifts) - 1)
        return np.asarray(self.shifts)[idx]


def split_signed(rule: ShiftRule) -> tuple[DiscreteShiftDistribution,
                                           DiscreteShiftDistribution, float]:
    """Split a rule into normalized positive/negative shift distributions.

    Exact rules over a set containing zero carry equal positive and negative
    coefficient mass, each half of the total; an imbalance beyond 1e-8 of
    the total mass means the rule cannot be sampled this way.
    """
    full = rule.expanded()
    c = np.asarray(full.coefficients)
    s = np.asarray(full.shifts)
    pos_mass = float(np.sum(np.maximum(c, 0.0)))
    neg_mass = float(np.sum(np.maximum(-c, 0.0)))
    l1 = pos_mass + neg_mass
    if l1 <= 0.0:
        raise InvalidRuleError("cannot split a rule with zero coefficient mass")
    if abs(pos_mass - neg_mass) > 1e-8 * l1:
        raise InvalidRuleError(
            f"positive and negative masses differ by {abs(pos_mass - neg_mass):.3e}; "
            "the rule is not exact for a set containing zero")
    pos_sel = c > 0
    neg_sel = c < 0
    pos = DiscreteShiftDistribution(
        tuple(s[pos_sel].tolist()), tuple((c[pos_sel] / pos_mass).tolist()))
    neg = DiscreteShiftDistribution(
        tuple(s[neg_sel].tolist()), tuple((-c[neg_sel] / neg_mass).tolist()))
    return pos, neg, l1


@dataclass(frozen=True)
class StochasticRule:
    """Sampler form of a shift rule.

    ``sample_positive``/``sample_negative`` draw shift batches from the two
    normalized sign components; ``sample`` draws a single (shift, weight)
    pair whose weight is a fair-signed copy of the total mass, so that
    ``E[w * f(theta + shift)] = f'(theta)``.
    """

    sample_positive: Callable[[np.random.Generator, int], np.ndarray]
    sample_negative: Callable[[np.random.Generator, int], np.ndarray]
    total_mass: float
    method: str = "stochastic"

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        if rng.integers(0, 2) == 0:
            return float(self.sample_positive(rng, 1)[0]), self.total_mass
        return float(self.sample_negative(rng, 1)[0]), -self.total_mass


def from_shift_rule(rule: ShiftRule, method: str = "stochastic") -> StochasticRule:
    """Sampler form of a finite rule via the signed-mass split."""
    pos, neg, l1 = split_signed(rule)
    return StochasticRule(pos.sample, neg.sample, l1, method)


# ---------------------------------------------------------------------------
# Core estimators
# ---------------------------------------------------------------------------

def stochastic_estimate(rule: StochasticRule, model: MeasurementModel,
                        theta: float, shots: int,
                        rng: np.random.Generator) -> GradientEstimate:
    """Paired estimator: S/2 draws of ``(g+ - g-) * mass / 2``.

    Each iteration samples one shift from the positive and one from the
    negative component and spends one measurement shot on each.
    """
    if shots < 2 or shots % 2:
        raise InvalidArgumentError("shots must be an even number >= 2")
    pairs = shots // 2
    shift_pos = rule.sample_positive(rng, pairs)
    shift_neg = rule.sample_negative(rng, pairs)
    g_pos = sample_measurement_batch(model, theta + shift_pos, rng)
    g_neg = sample_measurement_batch(model, theta + shift_neg, rng)
    values = (g_pos - g_neg) * (rule.total_mass / 2.0)
    mean, stderr = _mean_stderr(values)
    return GradientEstimate(mean, stderr, shots, rule.method)


def estimate_with_shot_split(rule: StochasticRule, model: MeasurementModel,
                             theta: float, n_samples: int, shots_each: int,
                             rng: np.random.Generator) -> GradientEstimate:
    """Mean-of-means estimator with n shift samples and m shots per sample.

    The (n=S, m=1) corner is the minimum-variance allocation for a fixed
    budget S = n*m; larger m trades shift-sampling resolution for repeated
    measurements and can only increase the variance.
    """
    if n_samples < 1 or shots_each < 1:
        raise InvalidArgumentError("need n_samples >= 1 and shots_each >= 1")
    signs = np.where(rng.integers(0, 2, n_samples) == 0, 1.0, -1.0)
    n_pos = int(np.sum(signs > 0))
    shifts = np.empty(n_samples)
    shifts[signs > 0] = rule.sample_positive(rng, n_pos)
    shifts[signs < 0] = rule.sample_negative(rng, n_samples - n_pos)
    thetas = np.repeat(theta + shifts, shots_each)
    outcomes = sample_measurement_batch(model, thetas, rng)
    inner = outcomes.reshape(n_samples, shots_each).mean(axis=1)
    values = rule.total_mass * signs * inner
    mean, stderr = _mean_stderr(values)
    return GradientEstimate(mean, stderr, n_samples * shots_each, rule.method)


# ---------------------------------------------------------------------------
# Triangle rule estimators
# ---------------------------------------------------------------------------

_TRIANGLE_CACHE_TERMS = 10_000
_triangle_cum: np.ndarray | None = None


def _triangle_cumulative() -> np.ndarray:
    global _triangle_cum
    if _triangle_cum is None:
        t = np.arange(_TRIANGLE_CACHE_TERMS)
        _triangle_cum = np.cumsum(8.0 / (math.pi**2 * (2 * t + 1) ** 2))
    return _triangle_cum


def _triangle_indices(u: np.ndarray) -> np.ndarray:
    """Map uniform draws to tail indices t with q_{t-1} <= u < q_t.

    Uses a cached cumulative table for the bulk (tail mass beyond the cache
    is below 1e-4) and continues the partial-sum iteration exactly for the
    rare draws that land past it.
    """
    cum = _triangle_cumulative()
    idx = np.searchsorted(cum, u, side="right")
    beyond = np.nonzero(idx >= _TRIANGLE_CACHE_TERMS)[0]
    for j in beyond:
        t = _TRIANGLE_CACHE_TERMS
        q = cum[-1]
        while True:
            q += 8.0 / (math.pi**2 * (2 * t + 1) ** 2)
            if q > u[j]:
                break
            t += 1
        idx[j] = t
    return idx


def triangle_estimate(bandwidth: float, model: MeasurementModel, theta: float,
                      shots: int, rng: np.random.Generator,
                      group: bool = False) -> GradientEstimate:
    """Single-shot triangle estimator: S draws of ``(-1)^(t+p) * L * g``.

    Unbiased whenever ``bandwidth`` is at least the true bandwidth of the
    measured function (the caller's contract).  With ``group=True`` the same
    samples are deduplicated into per-shift batches; the final mean is the
    identical weighted average, so grouping changes the execution plan, not
    the estimate.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    t = _triangle_indices(rng.random(shots))
    coin = rng.integers(0, 2, shots)
    shifts = np.where(coin == 0, 1.0, -1.0) * math.pi * (2 * t + 1) / (2.0 * bandwidth)
    weights = np.where((t + coin) % 2 == 0, 1.0, -1.0) * bandwidth
    assert np.all(np.abs(weights) <= bandwidth * (1 + 1e-12))
    outcomes = sample_measurement_batch(model, theta + shifts, rng)
    values = weights * outcomes
    mean, stderr = _mean_stderr(values)
    plan = None
    if group:
        groups = group_shifts(list(zip(shifts.tolist(), weights.tolist())))
        plan = ShotPlan(tuple(g[0] for g in groups),
                        tuple(g[2] for g in groups))
    return GradientEstimate(mean, stderr, shots, "triangle", plan)


def group_shifts(samples) -> list[tuple[float, float, int]]:
    """Collapse sampled (shift, weight) pairs into (shift, weight, count) groups.

    Groups appear in first-occurrence order; counts sum to the number of
    samples.  Downstream weighted means over the groups reproduce the
    ungrouped estimator exactly because the same outcomes are reused.
    """
    order: dict[tuple[float, float], int] = {}
    counts: list[int] = []
    for shift, weight in samples:
        key = (float(shift), float(weight))
        if key in order:
            counts[order[key]] += 1
        else:
            order[key] = len(counts)
            counts.append(1)
    return [(key[0], key[1], counts[i]) for key, i in order.items()]


# ---------------------------------------------------------------------------
# Zigzag estimator
# ---------------------------------------------------------------------------

def _zigzag_sample(bandwidth: float, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse-CDF sampling of the zigzag density."""
    lo = np.full(u.shape, -math.pi / bandwidth)
    hi = np.full(u.shape, math.pi / bandwidth)
    for _ in range(200):
        need = zigzag_cdf(lo, bandwidth) > u
        if not np.any(need):
            break
        lo[need] *= 2.0
    else:
        raise NumericFailureError("zigzag bracket expansion failed (left)")
    for _ in range(200):
        need = zigzag_cdf(hi, bandwidth) < u
        if not np.any(need):
            break
        hi[need] *= 2.0
    else:
        raise NumericFailureError("zigzag bracket expansion failed (right)")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        val = zigzag_cdf(mid, bandwidth)
        err = np.abs(val - u)
        if np.max(err) < 1e-10:
            break
        below = val < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        mid = 0.5 * (lo + hi)
    else:
        raise NumericFailureError("zigzag bisection failed to converge")
    return mid


def zigzag_estimate(bandwidth: float, model: MeasurementModel, theta: float,
                    shots: int, rng: np.random.Generator) -> GradientEstimate:
    """Smooth-density estimator: S draws of ``2 L sin(shift L) * g``."""
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    shifts = _zigzag_sample(bandwidth, rng.random(shots))
    weights = zigzag_weight(shifts, bandwidth)
    assert np.all(np.abs(weights) <= 2.0 * bandwidth * (1 + 1e-12))
    outcomes = sample_measurement_batch(model, theta + shifts, rng)
    mean, stderr = _mean_stderr(weights * outcomes)
    return GradientEstimate(mean, stderr, shots, "zigzag")


# ---------------------------------------------------------------------------
# Kernel estimator
# ---------------------------------------------------------------------------

def _kernel_probe_range(spec: KernelSpec) -> float:
    if spec.family == "normal":
        return 6.0 * spec.b
    if spec.family == "cauchy":
        return 50.0 / spec.b
    return spec.b


def kernel_estimate(spec: KernelSpec, omega: FrequencySet,
                    model: MeasurementModel, theta: float, shots: int,
                    rng: np.random.Generator,
                    lambda_floor: float | None = None) -> GradientEstimate:
    """Kernel-interpolation estimator: sample shift, weight by lambda(shift).

    Draws with ``|lambda| < lambda_floor`` are discarded without spending a
    measurement shot (they would contribute almost nothing but still cost
    hardware time); the default floor is 1e-8 of the probed max |lambda|, so
    the induced bias is of the same order.  A discard rate above 99% raises.
    """
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    weights_vec = kernel_weights(omega, spec)
    if lambda_floor is None:
        probe = np.linspace(-_kernel_probe_range(spec),
                            _kernel_probe_range(spec), 4097)
        lambda_floor = 1e-8 * float(np.max(np.abs(
            kernel_lambda(weights_vec, omega, probe))))
    accepted_shifts: list[np.ndarray] = []
    accepted_lams: list[np.ndarray] = []
    accepted = 0
    attempts = 0
    while accepted < shots:
        chunk = max(shots - accepted, 1024)
        draw = spec.sample(rng, chunk)
        lam = kernel_lambda(weights_vec, omega, draw)
        keep = np.abs(lam) >= lambda_floor
        attempts += chunk
        accepted += int(np.sum(keep))
        accepted_shifts.append(draw[keep])
        accepted_lams.append(lam[keep])
        if attempts >= 10_000 and accepted < 0.01 * attempts:
            raise DegenerateRuleError(
                f"kernel rule discarded {100 * (1 - accepted / attempts):.1f}% "
                "of samples; the lambda profile is degenerate")
    shifts = np.concatenate(accepted_shifts)[:shots]
    lams = np.concatenate(accepted_lams)[:shots]
    outcomes = sample_measurement_batch(model, theta + shifts, rng)
    mean, stderr = _mean_stderr(lams * outcomes)
    return GradientEstimate(mean, stderr, shots, f"kernel:{spec.family}")


# ---------------------------------------------------------------------------
# Equispaced stochastic estimator
# ---------------------------------------------------------------------------

def equispaced_probabilities(n: int) -> np.ndarray:
    """Distribution ``p_N(t) = 1 / (2 N^2 sin^2(shift_t / 2))`` over t < N."""
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    t = np.arange(n)
    shifts = math.pi * (2 * t + 1) / (2.0 * n)
    return 1.0 / (2.0 * n * n * np.sin(shifts / 2.0) ** 2)


def equispaced_stochastic_estimate(n: int, model: MeasurementModel,
                                   theta: float, shots: int,
                                   rng: np.random.Generator) -> GradientEstimate:
    """Paired estimator for integer frequencies: ``(-1)^t (g+ - g-) N / 2``."""
    if shots < 2 or shots % 2:
        raise InvalidArgumentError("shots must be an even number >= 2")
    pairs = shots // 2
    probs = equispaced_probabilities(n)
    cum = np.cumsum(probs)
    t = np.minimum(np.searchsorted(cum, rng.random(pairs), side="right"), n - 1)
    shifts = math.pi * (2 * t + 1) / (2.0 * n)
    g_pos = sample_measurement_batch(model, theta + shifts, rng)
    g_neg = sample_measurement_batch(model, theta - shifts, rng)
    values = np.where(t % 2 == 0, 1.0, -1.0) * (g_pos - g_neg) * (n / 2.0)
    mean, stderr = _mean_stderr(values)
    return GradientEstimate(mean, stderr, shots, "equispaced-stochastic")


# ---------------------------------------------------------------------------
# Deterministic evaluation with a shot plan
# ---------------------------------------------------------------------------

def allocate_shots(rule: ShiftRule, shots: int) -> ShotPlan:
    """Optimal-variance integer shot allocation ``S_p ~ S |c_p| / ||c||_1``.

    Largest-remainder rounding with a floor of one shot per nonzero
    coefficient (a zero allocation would silently drop a term of the rule
    and bias the estimate).
    """
    full = rule.expanded()
    c = np.abs(np.asarray(full.coefficients))
    nonzero = c > 0
    k = int(np.sum(nonzero))
    if k == 0:
        raise InvalidRuleError("rule has no nonzero coefficients")
    if shots < k:
        raise InsufficientShotsError(
            f"need at least {k} shots to cover every nonzero coefficient")
    quota = shots * c / float(np.sum(c))
    counts = np.floor(quota).astype(int)
    counts[~nonzero] = 0
    remainder = shots - int(np.sum(counts))
    if remainder > 0:
        frac = np.where(nonzero, quota - np.floor(quota), -1.0)
        # Ties resolved toward lower index via stable sort on (-frac, index).
        order = np.argsort(-frac, kind="stable")
        counts[order[:remainder]] += 1
    # Repair pass: lift zero allocations on nonzero coefficients.
    for p in np.nonzero(nonzero & (counts == 0))[0]:
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[p] += 1
    return ShotPlan(full.shifts, tuple(int(x) for x in counts))


def deterministic_estimate(rule: ShiftRule, model: MeasurementModel,
                           theta: float, plan: ShotPlan,
                           rng: np.random.Generator) -> GradientEstimate:
    """Weighted average ``sum_p c_p mean(S_p shots at theta + shift_p)``.

    The stderr propagates per-shift sample variances through
    ``|c_p|^2 / S_p``; single-shot entries fall back to the guaranteed
    variance bound sigma^2 (zero for noiseless models).
    """
    full = rule.expanded()
    if plan.shifts != full.shifts:
        raise InvalidArgumentError("plan does not match the rule's shifts")
    if any(n == 0 and c != 0 for n, c in zip(plan.counts, full.coefficients)):
        raise InsufficientShotsError(
            "plan assigns zero shots to a nonzero coefficient")
    total = 0.0
    var_total = 0.0
    for shift, coeff, count in zip(full.shifts, full.coefficients, plan.counts):
        if count == 0:
            continue
        outcomes = sample_measurement_batch(
            model, np.full(count, theta + shift), rng)
        total += coeff * float(np.mean(outcomes))
        if count >= 2:
            var = float(np.var(outcomes, ddof=1))
        else:
            var = 0.0 if model.noiseless else model.sigma**2
        var_total += coeff * coeff * var / count
    return GradientEstimate(total, math.sqrt(var_total), plan.total,
                            "deterministic", plan)


def two_pass_estimate(rule: StochasticRule, model: MeasurementModel,
                      theta: float, shots: int, rng: np.random.Generator,
                      n_samples: int | None = None,
                      pilot_shots: int = 2) -> GradientEstimate:
    """Experimental: pilot shots estimate per-shift variances, the rest of
    the budget is reallocated proportionally to ``|e| sqrt(Var(Y|x))``.

    The optimal nonuniform allocation needs conditional variances that are
    unknown a priori; this two-pass variant spends ``pilot_shots`` per
    sampled shift to estimate them.  Kept as an opt-in research path.
    """
    if n_samples is None:
        n_samples = max(shots // (4 * pilot_shots), 1)
    if shots < n_samples * pilot_shots:
        raise InsufficientShotsError("budget below the pilot requirement")
    signs = np.where(rng.integers(0, 2, n_samples) == 0, 1.0, -1.0)
    n_pos = int(np.sum(signs > 0))
    shifts = np.empty(n_samples)
    shifts[signs > 0] = rule.sample_positive(rng, n_pos)
    shifts[signs < 0] = rule.sample_negative(rng, n_samples - n_pos)
    pilot = sample_measurement_batch(
        model, np.repeat(theta + shifts, pilot_shots), rng
    ).reshape(n_samples, pilot_shots)
    pilot_var = np.var(pilot, axis=1, ddof=1) if pilot_shots >= 2 \
        else np.full(n_samples, model.sigma**2)
    score = np.sqrt(np.maximum(pilot_var, 1e-12))
    extra = shots - n_samples * pilot_shots
    alloc = np.floor(extra * score / np.sum(score)).astype(int)
    leftovers = extra - int(np.sum(alloc))
    if leftovers > 0:
        order = np.argsort(-(extra * score / np.sum(score) - alloc), kind="stable")
        alloc[order[:leftovers]] += 1
    sums = pilot.sum(axis=1)
    counts = np.full(n_samples, pilot_shots)
    for i in range(n_samples):
        if alloc[i]:
            more = sample_measurement_batch(
                model, np.full(alloc[i], theta + shifts[i]), rng)
            sums[i] += float(np.sum(more))
            counts[i] += alloc[i]
    values = rule.total_mass * signs * (sums / counts)
    mean, stderr = _mean_stderr(values)
    return GradientEstimate(mean, stderr, shots, rule.method + ":two-pass")
