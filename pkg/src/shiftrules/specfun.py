"""Trigonometric spectral functions and the simulated measurement model.

``SpectralFunction`` is the exact oracle used throughout the package:
``f(theta) = sum_w M_w exp(i w theta)`` with conjugate-symmetric complex
coefficients, so f is real.  ``MeasurementModel`` wraps a function with a
two-valued shot model whose outcomes are ``+A`` or ``-A``; a single shot is
unbiased for f(theta) and its variance is bounded by ``A**2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BrokenInvariantError, InvalidArgumentError, InvalidModelError
from .rng import make_rng
from .spectrum import FrequencySet

# Imaginary residues below this are discarded silently; above the hard
# threshold they indicate a broken conjugate-symmetry invariant.
_IMAG_WARN = 1e-12
_IMAG_HARD = 1e-9


@dataclass(frozen=True)
class SpectralFunction:
    """Finite Fourier-like series with conjugate-symmetric coefficients."""

    terms: dict  # frequency -> complex coefficient

    def __post_init__(self):
        cleaned: dict[float, complex] = {}
        for w, m in self.terms.items():
            cleaned[float(w)] = complex(m)
        for w, m in cleaned.items():
            if -w not in cleaned:
                raise InvalidArgumentError(
                    f"frequency {w} present without its negation")
            conj = cleaned[-w]
            scale = max(1.0, abs(m))
            if abs(conj - m.conjugate()) > 1e-12 * scale:
                raise InvalidArgumentError(
                    f"coefficients at +/-{abs(w)} are not conjugate partners")
        object.__setattr__(self, "terms", cleaned)
        freqs = np.array(sorted(cleaned), dtype=float)
        coeffs = np.array([cleaned[w] for w in freqs], dtype=complex)
        object.__setattr__(self, "_freqs", freqs)
        object.__setattr__(self, "_coeffs", coeffs)

    @property
    def frequencies(self) -> np.ndarray:
        return self._freqs

    @property
    def coefficients(self) -> np.ndarray:
        return self._coeffs

    @property
    def coefficient_l1(self) -> float:
        """sum_w |M_w|, an upper bound on sup |f|."""
        return float(np.sum(np.abs(self._coeffs)))

    @property
    def derivative_scale(self) -> float:
        """sum_w |w M_w|, an upper bound on sup |f'|."""
        return float(np.sum(np.abs(self._freqs * self._coeffs)))

    def to_json_dict(self) -> dict:
        return {"terms": [{"omega": w, "re": self.terms[w].real,
                           "im": self.terms[w].imag}
                          for w in sorted(self.terms)]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "SpectralFunction":
        return cls({t["omega"]: complex(t["re"], t["im"])
                    for t in data["terms"]})

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "SpectralFunction":
        return cls.from_json_dict(json.loads(text))


def _real_part(values: np.ndarray, scale: float):
    """Drop imaginary residue after asserting it is numerically negligible."""
    residue = np.max(np.abs(values.imag)) if values.size else 0.0
    if residue > _IMAG_HARD * max(1.0, scale):
        raise BrokenInvariantError(
            f"imaginary residue {residue:.3e} exceeds {_IMAG_HARD}")
    return values.real


def eval_function(f: SpectralFunction, theta) -> float | np.ndarray:
    """Evaluate f at theta (scalar or array)."""
    th = np.asarray(theta, dtype=float)
    phases = np.exp(1j * np.outer(th.ravel(), f.frequencies))
    vals = phases @ f.coefficients
    out = _real_part(vals, f.coefficient_l1).reshape(th.shape)
    return float(out) if np.isscalar(theta) or th.ndim == 0 else out


def exact_derivative(f: SpectralFunction, theta) -> float | np.ndarray:
    """Evaluate f'(theta) = sum_w i w M_w exp(i w theta)."""
    th = np.asarray(theta, dtype=float)
    phases = np.exp(1j * np.outer(th.ravel(), f.frequencies))
    vals = phases @ (1j * f.frequencies * f.coefficients)
    out = _real_part(vals, f.derivative_scale).reshape(th.shape)
    return float(out) if np.isscalar(theta) or th.ndim == 0 else out


def random_spectral_function(omega: FrequencySet, seed: int,
                             magnitude: float = 1.0) -> SpectralFunction:
    """Deterministic random instance over the given frequency set.

    Coefficients satisfy |M_w| <= magnitude and conjugate symmetry; the same
    (omega, seed) pair always produces the same function.
    """
    rng = make_rng(seed)
    terms: dict[float, complex] = {}
    for w in omega.frequencies:
        if w < 0:
            continue
        if w == 0.0:
            terms[0.0] = complex(rng.uniform(-magnitude, magnitude))
        else:
            r = rng.uniform(0.0, magnitude)
            phi = rng.uniform(0.0, 2.0 * np.pi)
            m = r * np.exp(1j * phi)
            terms[w] = m
            terms[-w] = m.conjugate()
    return SpectralFunction(terms)


@dataclass(frozen=True)
class MeasurementModel:
    """Two-outcome shot model for a spectral function.

    A single shot at theta returns +A with probability (1 + f(theta)/A)/2
    and -A otherwise, so the shot is unbiased and its variance is at most
    sigma^2 = A^2.  With ``noiseless=True`` a shot returns f(theta) itself,
    which is convenient for exactness checks.
    """

    function: SpectralFunction
    amplitude: float | None = None
    noiseless: bool = False

    def __post_init__(self):
        amp = self.amplitude
        if amp is None:
            amp = self.function.coefficient_l1
        amp = float(amp)
        if not amp > 0.0:
            raise InvalidArgumentError(
                "amplitude must be positive; pass one explicitly for the "
                "zero function")
        object.__setattr__(self, "amplitude", amp)

    @property
    def sigma(self) -> float:
        """Guaranteed bound on the single-shot standard deviation."""
        return self.amplitude


def sample_measurement(model: MeasurementModel, theta: float,
                       rng: np.random.Generator) -> float:
    """Draw one shot at theta."""
    return float(sample_measurement_batch(model, np.array([theta]), rng)[0])


def sample_measurement_batch(model: MeasurementModel, thetas: np.ndarray,
                             rng: np.random.Generator) -> np.ndarray:
    """Draw one shot at each theta in a batch (one rng draw per shot)."""
    thetas = np.asarray(thetas, dtype=float)
    values = np.atleast_1d(eval_function(model.function, thetas))
    amp = model.amplitude
    # Tiny slack absorbs roundoff in |f| <= sum |M_w|.
    if np.any(np.abs(values) > amp * (1.0 + 1e-12)):
        raise InvalidModelError(
            "function value exceeds the measurement amplitude bound")
    if model.noiseless:
        return values
    p_plus = np.clip((1.0 + values / amp) / 2.0, 0.0, 1.0)
    draws = rng.random(values.shape)
    return np.where(draws < p_plus, amp, -amp)
