"""Closed-form and interpolation-based shift rules.

The constructions here only need the frequency set (or just its bandwidth):

* triangle rule: delta comb at odd multiples of ``pi/(2*bandwidth)`` with
  coefficient mass exactly equal to the bandwidth;
* zigzag rule: a smooth shift density built from a single triangle period,
  with mass at most twice the bandwidth;
* kernel interpolation: weights from a positive-definite kernel matrix,
  turning any easy-to-sample density into an unbiased rule;
* equispaced closed form: the exact finite rule for integer frequencies,
  together with the series coefficients behind its derivation;
* approximate-bandwidth systems: discretize the band and feed the result to
  the L1 synthesizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j1 as _bessel_j1

from .errors import IllConditionedError, InvalidArgumentError
from .linsys import LinearSystem, ShiftRule, assemble, shift_grid, positive_shifts
from .spectrum import FrequencySet, positive_part

KERNEL_FAMILIES = ("normal", "uniform", "cauchy", "cosine", "wigner")

_CONDITION_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Sine integral
# ---------------------------------------------------------------------------

_SI_SERIES_CUTOFF = 6.0
_SI_SERIES_TERMS = 22
_SI_CF_ITERATIONS = 400


def _si_power_series(x: np.ndarray) -> np.ndarray:
    # Si(x) = sum_k (-1)^k x^(2k+1) / ((2k+1) (2k+1)!)
    x2 = x * x
    total = np.zeros_like(x)
    term = x.copy()  # k = 0 term inside the sum before the 1/(2k+1) factor
    for k in range(_SI_SERIES_TERMS):
        total += term / (2 * k + 1)
        term = term * (-x2) / ((2 * k + 2) * (2 * k + 3))
    return total

def _exp1_imag_cf(x: np.ndarray) -> np.ndarray:
    """Continued fraction for E1(i x), x > 0 (modified Lentz, vectorized).

    E1(z) = exp(-z) / (z + 1 - 1/(z + 3 - 4/(z + 5 - 9/(...)))), evaluated
    on the imaginary axis.  This is the standard convergent evaluation of the
    large-argument auxiliary functions; the plain asymptotic series loses too
    much accuracy in the mid range 6 < x < 40.
    """
    z = 1j * x
    tiny = 1e-300
    b = z + 1.0
    c = np.full(x.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    f = d.copy()
    for k in range(1, _SI_CF_ITERATIONS + 1):
        a = -float(k * k)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        f = f * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return np.exp(-z) * f


def sine_integral(x) -> float | np.ndarray:
    """Si(x) = integral of sin(t)/t from 0 to x.

    Power series for |x| <= 6, continued-fraction auxiliary functions above;
    absolute error stays below 1e-13 over |x| <= 1e3.  Accepts scalars or
    arrays.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    a = np.atleast_1d(arr).astype(float)
    out = np.empty_like(a)
    small = np.abs(a) <= _SI_SERIES_CUTOFF
    if np.any(small):
        out[small] = _si_power_series(a[small])
    if np.any(~small):
        xa = np.abs(a[~small])
        e1 = _exp1_imag_cf(xa)
        out[~small] = np.sign(a[~small]) * (np.pi / 2.0 + e1.imag)
    return float(out[0]) if scalar else out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Trigamma and the equispaced eta coefficients
# ---------------------------------------------------------------------------

# Bernoulli numbers B_2..B_14 for the asymptotic tail.
_BERNOULLI = (1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30,
              5.0 / 66, -691.0 / 2730, 7.0 / 6)


def trigamma(z: float) -> float:
    """psi_1(z) for z > 0 via recurrence shift and Bernoulli asymptotics."""
    if z <= 0:
        raise InvalidArgumentError("trigamma requires z > 0")
    acc = 0.0
    while z < 10.0:
        acc += 1.0 / (z * z)
        z += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    total = inv + 0.5 * inv2
    power = inv * inv2
    for b in _BERNOULLI:
        total += b * power
        power *= inv2
    return acc + total


def eta_coefficient(t: int, n: int) -> float:
    """Series coefficient ``(8/pi^2) sum_k (2t + 4Nk + 1)^-2`` for 0 <= t < 2N.

    Summed explicitly for 64 terms with an Euler-Maclaurin tail, which keeps
    the truncation error below 1e-12 for any N; equals
    ``trigamma((2t+1)/(4N)) / (2 pi^2 N^2)``.
    """
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    if not 0 <= t < 2 * n:
        raise InvalidArgumentError("t must satisfy 0 <= t < 2N")
    a = 2 * t + 1
    b = 4 * n
    explicit = 64
    k = np.arange(explicit)
    total = float(np.sum(1.0 / (a + b * k) ** 2))
    u = a + b * explicit
    # Euler-Maclaurin tail of sum_{k>=K} (a + b k)^-2.
    total += 1.0 / (b * u) + 0.5 / u**2 + b / (6.0 * u**3) - b**3 / (30.0 * u**5)
    return 8.0 / math.pi**2 * total


def equispaced_rule(n: int) -> ShiftRule:
    """Exact closed-form rule for the integer frequency set {-N..N}.

    Positive shifts ``pi(2t+1)/(2N)`` with coefficients
    ``(-1)^t / (4N sin^2(shift/2))``; the expanded coefficient mass is
    exactly N.
    """
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    t = np.arange(n)
    shifts = np.pi * (2 * t + 1) / (2 * n)
    # 2N(1 - cos s) written as 4N sin^2(s/2) for accuracy at small shifts.
    coeffs = (-1.0) ** t / (4.0 * n * np.sin(shifts / 2.0) ** 2)
    return ShiftRule(tuple(shifts.tolist()), tuple(coeffs.tolist()),
                     symmetric=True, source="equispaced-closed-form")


# ---------------------------------------------------------------------------
# Triangle rule
# ---------------------------------------------------------------------------

def triangle_weight(t: int, bandwidth: float) -> tuple[float, float]:
    """Shift and coefficient magnitude of the t-th triangle term.

    Returns ``(pi(2t+1)/(2L), (4L/pi^2)(2t+1)^-2)`` for bandwidth L; the
    caller attaches the alternating sign (-1)^t.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if t < 0:
        raise InvalidArgumentError("t must be >= 0")
    shift = math.pi * (2 * t + 1) / (2.0 * bandwidth)
    coeff = 4.0 * bandwidth / (math.pi**2 * (2 * t + 1) ** 2)
    return shift, coeff


def triangle_truncated_rule(bandwidth: float, tail_tolerance: float) -> ShiftRule:
    """Deterministic truncation of the (infinite) triangle delta comb.

    Terms are kept until the discarded coefficient mass drops below
    ``tail_tolerance * bandwidth``.  The truncated rule keeps mass at most
    the bandwidth and its residual on an in-band frequency set scales with
    the tolerance; the unbiased route is the stochastic triangle estimator.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if not 0 < tail_tolerance <= 1:
        raise InvalidArgumentError("tail tolerance must lie in (0, 1]")
    shifts = []
    coeffs = []
    remaining = bandwidth  # total two-sided mass of the full comb
    t = 0
    while remaining > tail_tolerance * bandwidth:
        shift, mag = triangle_weight(t, bandwidth)
        shifts.append(shift)
        coeffs.append((-1.0) ** t * mag)
        remaining -= 2.0 * mag
        t += 1
    return ShiftRule(tuple(shifts), tuple(coeffs), symmetric=True,
                     source="triangle-truncated")


# ---------------------------------------------------------------------------
# Zigzag rule
# ---------------------------------------------------------------------------

def zigzag_density(shift, bandwidth: float):
    """Shift density ``2 sin^2(s L / 2) / (pi L s^2)`` with L the bandwidth."""
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    s = np.asarray(shift, dtype=float)
    y = s * bandwidth / 2.0
    # (L / 2 pi) * sinc-squared form keeps the removable singularity smooth.
    small = np.abs(y) < 1e-6
    ratio = np.empty_like(y)
    ys = y[~small]
    ratio[~small] = (np.sin(ys) / ys) ** 2
    ratio[small] = 1.0 - y[small] ** 2 / 3.0
    out = bandwidth / (2.0 * np.pi) * ratio
    return float(out) if np.isscalar(shift) else out


def zigzag_weight(shift, bandwidth: float):
    """Importance weight ``2 L sin(s L)`` of the zigzag estimator."""
    s = np.asarray(shift, dtype=float)
    out = 2.0 * bandwidth * np.sin(s * bandwidth)
    return float(out) if np.isscalar(shift) else out


def zigzag_cdf(shift, bandwidth: float):
    """Cumulative distribution of the zigzag density (uses Si)."""
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    s = np.asarray(shift, dtype=float)
    x = s * bandwidth
    small = np.abs(x) < 1e-5
    out = np.empty_like(x)
    xl = x[~small]
    out[~small] = (np.pi * xl + 2.0 * np.cos(xl)
                   + 2.0 * xl * sine_integral(xl) - 2.0) / (2.0 * np.pi * xl)
    out[small] = 0.5 + x[small] / (2.0 * np.pi)
    return float(out) if np.isscalar(shift) else out


# ---------------------------------------------------------------------------
# Kernel interpolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """A sampling density family and its width hyperparameter B.

    Densities are even, nonnegative and integrate to one; the kernel is the
    corresponding Fourier transform (Bochner pair):

    family   density p(s)                         kernel k(w)
    normal   exp(-s^2/(2B^2)) / sqrt(2 pi B^2)    exp(-B^2 w^2 / 2)
    uniform  1/(2B) on [-B, B]                    sin(Bw)/(Bw)
    cauchy   (B/pi) / (1 + (Bs)^2)                exp(-|w|/B)
    cosine   (1 + cos(pi s / B)) / (2B) on [-B,B] sin(Bw)/(Bw) / (1-(Bw/pi)^2)
    wigner   2 sqrt(B^2-s^2) / (pi B^2)           2 J1(Bw) / (Bw)
    """

    family: str
    b: float

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}")
        if not self.b > 0:
            raise InvalidArgumentError("kernel width B must be > 0")

    def density(self, shift) -> np.ndarray:
        s = np.asarray(shift, dtype=float)
        b = self.b
        if self.family == "normal":
            out = np.exp(-0.5 * (s / b) ** 2) / math.sqrt(2.0 * math.pi * b * b)
        elif self.family == "uniform":
            out = np.where(np.abs(s) <= b, 1.0 / (2.0 * b), 0.0)
        elif self.family == "cauchy":
            out = (b / math.pi) / (1.0 + (b * s) ** 2)
        elif self.family == "cosine":
            out = np.where(np.abs(s) <= b,
                           (1.0 + np.cos(math.pi * s / b)) / (2.0 * b), 0.0)
        else:  # wigner
            inside = np.clip(b * b - s * s, 0.0, None)
            out = 2.0 * np.sqrt(inside) / (math.pi * b * b)
        return out

    def kernel(self, omega) -> np.ndarray:
        w = np.abs(np.asarray(omega, dtype=float))
        u = self.b * w
        if self.family == "normal":
            return np.exp(-0.5 * u * u)
        if self.family == "cauchy":
            return np.exp(-w / self.b)
        if self.family == "uniform":
            return np.where(u < 1e-8, 1.0 - u * u / 6.0,
                            np.sin(np.maximum(u, 1e-30)) / np.maximum(u, 1e-30))
        if self.family == "cosine":
            near_pi = np.abs(u - math.pi) < 1e-5
            safe = np.where(near_pi, 1.0, u)
            base = np.where(
                safe < 1e-8, 1.0 - safe * safe * (1.0 / 6.0 - 1.0 / math.pi**2),
                np.sin(safe) / safe / (1.0 - (safe / math.pi) ** 2))
            # Removable singularity at u = pi: k -> 1/2 with slope -3/(2 pi).
            return np.where(near_pi, 0.5 - 1.5 * (u - math.pi) / math.pi, base)
        # wigner
        return np.where(u < 1e-8, 1.0 - u * u / 8.0,
                        2.0 * _bessel_j1(u) / np.maximum(u, 1e-30))

    def cdf(self, shift) -> np.ndarray:
        s = np.asarray(shift, dtype=float)
        b = self.b
        if self.family == "normal":
            from scipy.special import erf
            return 0.5 * (1.0 + erf(s / (b * math.sqrt(2.0))))
        if self.family == "uniform":
            return np.clip((s + b) / (2.0 * b), 0.0, 1.0)
        if self.family == "cauchy":
            return 0.5 + np.arctan(b * s) / math.pi
        if self.family == "cosine":
            x = np.clip(s, -b, b)
            return (x + b) / (2.0 * b) + np.sin(math.pi * x / b) / (2.0 * math.pi)
        x = np.clip(s, -b, b)
        return (0.5 + x * np.sqrt(np.clip(b * b - x * x, 0.0, None))
                / (math.pi * b * b) + np.arcsin(x / b) / math.pi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        b = self.b
        if self.family == "normal":
            return rng.normal(0.0, b, size)
        if self.family == "uniform":
            return rng.uniform(-b, b, size)
        if self.family == "cauchy":
            return rng.standard_cauchy(size) / b
        if self.family == "wigner":
            return b * (2.0 * rng.beta(1.5, 1.5, size) - 1.0)
        # cosine: inverse CDF by bisection (the CDF is strictly increasing)
        u = rng.random(size)
        lo = np.full(size, -b)
        hi = np.full(size, b)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def kernel_gershgorin(omega: FrequencySet, spec: KernelSpec) -> np.ndarray:
    """Gershgorin radii ``R_i = sum_{j != i} |k(w_i - w_j)|``.

    The kernel matrix has unit diagonal, so radii well below one guarantee
    invertibility; radii near or above one flag likely ill-conditioning.
    """
    w = omega.as_array()
    k = spec.kernel(w[:, None] - w[None, :])
    return np.sum(np.abs(k), axis=1) - 1.0


def kernel_weights(omega: FrequencySet, spec: KernelSpec,
                   jitter: float = 0.0) -> np.ndarray:
    """Interpolation weights ``y = K^-1 w`` over the full frequency set.

    With jitter = 0 the weights reproduce ``sum_i y_i k(w - w_i) = w`` at
    every frequency in the set.  A condition estimate above 1e12 raises,
    pointing at the Gershgorin guideline for choosing the width B.
    """
    if jitter < 0:
        raise InvalidArgumentError("jitter must be >= 0")
    w = omega.as_array()
    k = spec.kernel(w[:, None] - w[None, :])
    if jitter:
        k = k + jitter * np.eye(w.size)
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > _CONDITION_LIMIT:
        radii = kernel_gershgorin(omega, spec)
        raise IllConditionedError(
            f"kernel matrix condition {cond:.2e} exceeds {_CONDITION_LIMIT:.0e}; "
            f"max Gershgorin radius {np.max(radii):.2e} (want well below 1; "
            "widen or narrow B so off-diagonal kernel values shrink)")
    return np.linalg.solve(k, w)


def kernel_lambda(weights: np.ndarray, omega: FrequencySet, shift):
    """Estimator factor ``lambda(s) = sum_{w > 0} 2 y_w sin(w s)``.

    ``weights`` must be aligned with ``omega.frequencies`` (as returned by
    kernel_weights); only the positive-frequency entries enter the sum.
    """
    w = omega.as_array()
    weights = np.asarray(weights, dtype=float)
    if weights.shape != w.shape:
        raise InvalidArgumentError("weights must align with the frequency set")
    mask = w > 0
    wp = w[mask]
    yp = weights[mask]
    s = np.asarray(shift, dtype=float)
    out = 2.0 * np.sin(np.multiply.outer(s, wp)) @ yp
    return float(out) if np.isscalar(shift) else out


# ---------------------------------------------------------------------------
# Approximate rules from a bandwidth alone
# ---------------------------------------------------------------------------

def approx_bandwidth_system(bandwidth: float, l: int, p: int,
                            b: float = math.pi) -> LinearSystem:
    """Discretize the band into ``{l'/L * bandwidth}`` and build its system.

    The result is meant for the L1 synthesizer; the rule it produces is
    exact for functions whose frequencies sit on the discretized grid and
    approximate for anything else inside the band.  Uses the uniform shift
    grid with P positive shifts on (0, B].
    """
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if not 1 <= l <= p:
        raise InvalidArgumentError("need 1 <= L <= P")
    freqs = bandwidth * np.arange(-l, l + 1) / l
    omega = FrequencySet(tuple(freqs.tolist()))
    grid = shift_grid("uniform", p, b)
    return assemble(omega, positive_shifts(grid), symmetric=True)
