"""Beat-frequency sets.

A gate generator with eigenvalues ``E_1..E_n`` produces an expectation
function whose only frequencies are the pairwise differences ``E_j - E_i``.
This module builds and manipulates those frequency sets: construction from
eigenvalues, positive halves, bandwidths, sumsets for shared parameters and
the equispaced family.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SizeLimitError

DEFAULT_DEDUP_TOLERANCE = 1e-9

# Guard for iterated sumsets: beyond this many candidate sums the caller
# should switch to the bandwidth shortcut (shared_bandwidth).
DEFAULT_SUMSET_CAP = 10**6


def _dedup_sorted(values: np.ndarray, tol: float) -> np.ndarray:
    """Collapse clusters of near-equal sorted values.

    Clusters are split where consecutive gaps exceed ``tol``; each cluster is
    represented by its maximum so the largest frequency (the bandwidth)
    survives deduplication exactly.
    """
    if values.size == 0:
        return values
    if tol <= 0.0:
        return np.unique(values)
    breaks = np.nonzero(np.diff(values) > tol)[0]
    ends = np.append(breaks, values.size - 1)
    return values[ends]


@dataclass(frozen=True)
class FrequencySet:
    """A sorted, deduplicated, symmetric set of real beat frequencies."""

    frequencies: tuple[float, ...]
    dedup_tolerance: float = DEFAULT_DEDUP_TOLERANCE

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        if len(freqs) == 0:
            raise InvalidArgumentError("frequency set must be non-empty")
        if not all(np.isfinite(freqs)):
            raise InvalidArgumentError("frequencies must be finite")
        if self.dedup_tolerance < 0:
            raise InvalidArgumentError("dedup tolerance must be >= 0")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise InvalidArgumentError("frequencies must be strictly increasing")
        # Mirror symmetry must hold exactly: omega in the set iff -omega is.
        mirrored = tuple(-w for w in reversed(freqs))
        if mirrored != freqs:
            raise InvalidArgumentError(
                "frequency set must be symmetric about zero")
        object.__setattr__(self, "frequencies", freqs)

    def __len__(self) -> int:
        return len(self.frequencies)

    def __iter__(self):
        return iter(self.frequencies)

    @property
    def has_zero(self) -> bool:
        return 0.0 in self.frequencies

    def as_array(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float)

    def to_json_dict(self) -> dict:
        return {"frequencies": list(self.frequencies),
                "tolerance": self.dedup_tolerance}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FrequencySet":
        return cls(tuple(data["frequencies"]), float(data["tolerance"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "FrequencySet":
        return cls.from_json_dict(json.loads(text))


def _from_positive(positive: np.ndarray, tol: float,
                   include_zero: bool = True) -> FrequencySet:
    """Build a symmetric FrequencySet from deduplicated positive entries."""
    pos = _dedup_sorted(np.sort(positive[positive > tol]), tol)
    freqs = np.concatenate([-pos[::-1], [0.0] if include_zero else [], pos])
    return FrequencySet(tuple(freqs.tolist()), tol)


def from_eigenvalues(energies, dedup_tolerance: float = DEFAULT_DEDUP_TOLERANCE
                     ) -> FrequencySet:
    """All pairwise eigenvalue differences, deduplicated and symmetrized.

    Always contains zero (the j == i pairs) and is closed under negation.
    """
    arr = np.asarray(list(energies), dtype=float)
    if arr.size == 0:
        raise InvalidArgumentError("eigenvalue list must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("eigenvalues must be finite")
    if dedup_tolerance < 0:
        raise InvalidArgumentError("dedup tolerance must be >= 0")
    diffs = (arr[:, None] - arr[None, :]).ravel()
    return _from_positive(diffs, dedup_tolerance)


def positive_part(omega: FrequencySet) -> tuple[float, ...]:
    """The strictly positive frequencies of the set."""
    return tuple(w for w in omega.frequencies if w > 0)


def bandwidth(omega: FrequencySet) -> float:
    """Largest absolute frequency in the set."""
    return max(abs(omega.frequencies[0]), abs(omega.frequencies[-1]))


def shared_spectrum(layers, cap: int = DEFAULT_SUMSET_CAP) -> FrequencySet:
    """Iterated sumset of per-layer frequency sets.

    One tunable parameter driving T gates sees the sumset of the per-gate
    beat sets; its bandwidth is the sum of the per-layer bandwidths.  The
    candidate count grows as the product of the layer sizes, so the
    construction refuses to proceed past ``cap``; use ``shared_bandwidth``
    for large layer counts.
    """
    layers = list(layers)
    if not layers:
        raise InvalidArgumentError("at least one layer is required")
    size = 1
    for layer in layers:
        size *= len(layer)
        if size > cap:
            raise SizeLimitError(
                f"sumset would exceed {cap} candidates; "
                "use shared_bandwidth for the bandwidth-only path")
    tol = max(layer.dedup_tolerance for layer in layers)
    sums = layers[0].as_array()
    for layer in layers[1:]:
        sums = (sums[:, None] + layer.as_array()[None, :]).ravel()
        # Intermediate dedup keeps the array small without losing symmetry.
        sums = _dedup_sorted(np.sort(sums), tol)
    return _from_positive(sums, tol, include_zero=bool(np.any(np.abs(sums) <= tol)))


def shared_bandwidth(layer_bandwidths) -> float:
    """Sum of per-layer bandwidths (the sumset bandwidth, computed directly)."""
    total = 0.0
    for b in layer_bandwidths:
        if b < 0:
            raise InvalidArgumentError("bandwidths must be >= 0")
        total += float(b)
    return total


def equispaced(n: int) -> FrequencySet:
    """The integer frequency set {-N, ..., -1, 0, 1, ..., N}."""
    if n < 1:
        raise InvalidArgumentError("N must be >= 1")
    freqs = np.arange(-n, n + 1, dtype=float)
    return FrequencySet(tuple(freqs.tolist()))
