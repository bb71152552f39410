"""Concrete models exposed as spectral functions.

Three families used throughout the tests and the CLI:

* the XY spin chain, whose exactly known single-particle energies give a
  crowded set of incommensurate beat frequencies;
* the Jaynes-Cummings atom-cavity model, solvable in 2x2 excitation blocks,
  with an unbounded spectrum that must be truncated;
* layered Z-rotation circuits sharing one tunable parameter through fixed
  weights, whose beat set is a sumset but whose bandwidth is trivial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, SizeLimitError, TruncationError
from .rng import make_rng
from .specfun import SpectralFunction, random_spectral_function
from .spectrum import (FrequencySet, bandwidth, from_eigenvalues,
                       shared_bandwidth, shared_spectrum)


# ---------------------------------------------------------------------------
# XY chain
# ---------------------------------------------------------------------------

def xy_energies(length: int) -> np.ndarray:
    """Single-particle energies ``cos(pi k / (L+1))`` for k = 1..L."""
    if length < 2:
        raise InvalidArgumentError("chain length must be >= 2")
    k = np.arange(1, length + 1)
    return np.cos(np.pi * k / (length + 1))


def xy_spectrum(length: int) -> FrequencySet:
    """Beat frequencies of the XY chain's single-particle spectrum."""
    return from_eigenvalues(xy_energies(length), dedup_tolerance=1e-9)


def xy_function(length: int) -> SpectralFunction:
    """The evolution profile ``sum_{w > 0} cos(w theta) / w`` over the beats."""
    omega = xy_spectrum(length)
    terms: dict[float, complex] = {0.0: 0.0}
    for w in omega.frequencies:
        if w > 0:
            terms[w] = 1.0 / (2.0 * w)
            terms[-w] = 1.0 / (2.0 * w)
    return SpectralFunction(terms)


# ---------------------------------------------------------------------------
# Jaynes-Cummings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JCParams:
    """Atom-cavity model parameters with a boson-number truncation.

    ``norm_floor`` bounds the coherent-state mass the truncation may drop;
    with cutoff >= 30 and |alpha| <= 2 the dropped mass stays below 1e-8,
    and moderate cutoffs (the rule-synthesis side uses 10) stay well inside
    the default.
    """

    detuning: float
    coupling: float
    alpha: float
    cutoff: int
    norm_floor: float = 1e-6

    def __post_init__(self):
        if self.cutoff < 1:
            raise InvalidArgumentError("cutoff must be >= 1")
        if not 0 < self.norm_floor < 1:
            raise InvalidArgumentError("norm_floor must lie in (0, 1)")


def jc_eigenvalues(detuning: float, coupling: float, n: int) -> float:
    """Excitation-sector energy scale ``sqrt(detuning^2 + coupling^2 (n+1))``."""
    if n < 0:
        raise InvalidArgumentError("n must be >= 0")
    return math.sqrt(detuning**2 + coupling**2 * (n + 1))


def jc_levels(detuning: float, coupling: float, cutoff: int) -> np.ndarray:
    """Energy levels of the truncated model.

    The atom-excited zero-photon state is uncoupled at -detuning/2; each
    sector with m = 1..cutoff photons contributes the split pair
    ``+/- sqrt(detuning^2 + coupling^2 m) / 2``.
    """
    if cutoff < 1:
        raise InvalidArgumentError("cutoff must be >= 1")
    m = np.arange(1, cutoff + 1)
    half = 0.5 * np.sqrt(detuning**2 + coupling**2 * m)
    return np.concatenate([[-detuning / 2.0], half, -half])


def jc_bandwidth(detuning: float, coupling: float, cutoff: int) -> float:
    """Largest beat frequency of the truncated model."""
    return bandwidth(from_eigenvalues(jc_levels(detuning, coupling, cutoff)))


def _coherent_mass(alpha: float, cutoff: int) -> tuple[np.ndarray, float]:
    """Truncated Poisson weights |<m|alpha>|^2 and the dropped tail mass."""
    a = abs(alpha) ** 2
    m = np.arange(cutoff + 1)
    log_w = -a + m * np.log(a) - np.array([math.lgamma(x + 1) for x in m]) \
        if a > 0 else np.where(m == 0, 0.0, -np.inf)
    weights = np.exp(log_w)
    dropped = max(0.0, 1.0 - float(np.sum(weights)))
    return weights / np.sum(weights), dropped


def _jc_sector_data(p: JCParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sector (weight, frequency, coupling fraction) arrays.

    Sector m >= 1 couples (photon m, atom down) to (photon m-1, atom up)
    with block [[d, g], [g, -d]], d = detuning/2, g = coupling sqrt(m)/2;
    its beat frequency is 2 sqrt(d^2 + g^2) and the coupling fraction
    ``g^2 / (d^2 + g^2)`` controls how much population oscillates.
    """
    weights, dropped = _coherent_mass(p.alpha, p.cutoff)
    if dropped > p.norm_floor:
        raise TruncationError(
            f"truncation drops {dropped:.3e} of the coherent mass "
            f"(allowed {p.norm_floor:.1e}); raise the cutoff")
    m = np.arange(1, p.cutoff + 1)
    d = p.detuning / 2.0
    g = p.coupling * np.sqrt(m) / 2.0
    e_half_sq = d * d + g * g
    freq = 2.0 * np.sqrt(e_half_sq)
    frac = np.divide(g * g, e_half_sq, out=np.zeros_like(e_half_sq),
                     where=e_half_sq > 0)
    return weights, freq, frac


def jc_expectation(p: JCParams, theta: float) -> float:
    """Atom-inversion profile from exact 2x2 block propagation.

    The initial state is a truncated coherent cavity state with the atom
    excited (Z eigenvalue -1 under the convention Z|0> = +|0>); each sector
    oscillates at its own block frequency.
    """
    weights, freq, frac = _jc_sector_data(p)
    osc = 2.0 * frac * np.sin(freq * theta / 2.0) ** 2 - 1.0
    return float(weights[0] * (-1.0) + np.dot(weights[1:], osc))


def jc_function(p: JCParams) -> SpectralFunction:
    """The same profile as ``jc_expectation`` in spectral form.

    Expanding the per-sector oscillation gives a cosine series: the constant
    collects ``weight (frac - 1)`` and each sector frequency carries
    ``-weight * frac / 2`` on both signs.
    """
    weights, freq, frac = _jc_sector_data(p)
    terms: dict[float, complex] = {0.0: 0.0}
    terms[0.0] = complex(-weights[0] + float(np.dot(weights[1:], frac - 1.0)))
    for w_m, f_m, nu in zip(weights[1:], frac, freq):
        if nu == 0.0:
            terms[0.0] += complex(-w_m * f_m)
            continue
        coeff = complex(-w_m * f_m / 2.0)
        terms[nu] = terms.get(nu, 0.0) + coeff
        terms[-nu] = terms.get(-nu, 0.0) + coeff
    return SpectralFunction(terms)


# ---------------------------------------------------------------------------
# Shared-parameter Z-rotation circuits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SharedZModel:
    """A random circuit profile whose layers share one parameter.

    ``function`` is the single-variable projection (None when the sumset
    explosion cap forced the bandwidth-only fallback); ``multi_eval``
    evaluates the underlying multi-parameter profile for chain-rule
    baselines.
    """

    weights: tuple[float, ...]
    bandwidth: float
    omega: FrequencySet | None
    function: SpectralFunction | None
    multi_eval: Callable[[np.ndarray], float] | None


def shared_z_model(weights, seed: int, magnitude: float = 1.0,
                   combo_cap: int = 100_000) -> SharedZModel:
    """Random shared-parameter model for layer weights ``w``.

    Layer i applies a Z rotation by ``w_i * theta``, contributing beat
    frequencies ``{-2 w_i, 0, 2 w_i}``; the combined profile lives on the
    sumset and its bandwidth is exactly ``2 ||w||_1``.  Beyond the explosion
    cap only the bandwidth is returned.
    """
    w = tuple(float(x) for x in weights)
    if not all(np.isfinite(w)):
        raise InvalidArgumentError("weights must be finite")
    lam = shared_bandwidth([2.0 * abs(x) for x in w])
    if 3 ** len(w) > combo_cap:
        return SharedZModel(w, lam, None, None, None)

    layers = [FrequencySet((-2.0 * abs(x), 0.0, 2.0 * abs(x)))
              if x != 0 else FrequencySet((0.0,)) for x in w]
    try:
        omega = shared_spectrum(layers)
    except SizeLimitError:
        return SharedZModel(w, lam, None, None, None)

    # Random conjugate-symmetric coefficients over the half combo lattice.
    rng = make_rng(seed)
    combos = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * len(w)),
                                  indexing="ij"), axis=-1).reshape(-1, len(w))
    coeffs: dict[tuple[int, ...], complex] = {}
    for combo in combos:
        key = tuple(int(x) for x in combo)
        if key in coeffs:
            continue
        neg = tuple(-x for x in key)
        if key == neg:
            coeffs[key] = complex(rng.uniform(-magnitude, magnitude))
        else:
            r = rng.uniform(0.0, magnitude)
            phi = rng.uniform(0.0, 2.0 * np.pi)
            coeffs[key] = r * np.exp(1j * phi)
            coeffs[neg] = coeffs[key].conjugate()

    terms: dict[float, complex] = {}
    for key, m in coeffs.items():
        nu = float(np.dot(2.0 * np.asarray(w), np.asarray(key, dtype=float)))
        terms[nu] = terms.get(nu, 0.0) + m
    function = SpectralFunction(terms)

    combo_mat = np.asarray(sorted(coeffs), dtype=float)
    coeff_vec = np.asarray([coeffs[tuple(int(x) for x in row)]
                            for row in combo_mat])

    def multi_eval(thetas: np.ndarray) -> float:
        th = np.asarray(thetas, dtype=float)
        if th.shape != (len(w),):
            raise InvalidArgumentError("theta vector length must match weights")
        phase = np.exp(1j * 2.0 * (combo_mat @ th))
        return float(np.real(np.sum(coeff_vec * phase)))

    return SharedZModel(w, lam, omega, function, multi_eval)


def chain_rule_baseline(weights, f_multi: Callable[[np.ndarray], float],
                        theta: float) -> float:
    """Chain-rule gradient with the per-parameter two-point rule.

    ``sum_i w_i [f(base + pi/4 e_i) - f(base - pi/4 e_i)]`` at base
    ``theta * w``; exact for per-parameter beat sets {-2, 0, 2}.
    """
    w = np.asarray(list(weights), dtype=float)
    base = theta * w
    total = 0.0
    for i, wi in enumerate(w):
        if wi == 0.0:
            continue
        step = np.zeros_like(base)
        step[i] = np.pi / 4.0
        total += wi * (f_multi(base + step) - f_multi(base - step))
    return total
