"""Shift-rule linear systems.

A shift rule expresses a derivative as ``f'(theta) = sum_p c_p
f(theta + shift_p)``.  Requiring this for every frequency in a set Omega
gives the linear constraints ``sum_p c_p exp(i w shift_p) = i w``.  This
module assembles those systems (general and symmetric form), tests their
feasibility, solves the minimum-L2 variant, verifies candidate rules and
applies rules to spectral functions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NoSolutionError
from .specfun import SpectralFunction, eval_function
from .spectrum import FrequencySet, positive_part

RULE_SOURCES = ("L1", "L2", "TV", "triangle-truncated",
                "equispaced-closed-form", "kernel", "manual")

# Relative singular-value threshold used by the rank test.
DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class ShiftRule:
    """A finite list of (shift, coefficient) pairs.

    Symmetric rules store only the positive shifts: the stored pair
    ``(shift, c)`` stands for ``c * [f(theta+shift) - f(theta-shift)]`` and
    is expanded on demand, which keeps the antisymmetry invariant out of the
    bookkeeping.
    """

    shifts: tuple[float, ...]
    coefficients: tuple[float, ...]
    symmetric: bool = False
    source: str = "manual"

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(shifts) != len(coeffs):
            raise InvalidArgumentError("shifts and coefficients differ in length")
        if not all(np.isfinite(shifts)) or not all(np.isfinite(coeffs)):
            raise InvalidArgumentError("shift rule entries must be finite")
        if self.symmetric and any(s <= 0 for s in shifts):
            raise InvalidArgumentError(
                "symmetric rules store strictly positive shifts only")
        if self.source not in RULE_SOURCES:
            raise InvalidArgumentError(f"unknown rule source {self.source!r}")
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "coefficients", coeffs)

    def __len__(self) -> int:
        return len(self.shifts)

    @property
    def l1_norm(self) -> float:
        """Total coefficient mass of the expanded rule."""
        total = float(np.sum(np.abs(self.coefficients)))
        return 2.0 * total if self.symmetric else total

    def expanded(self) -> "ShiftRule":
        """Full +/- form; a no-op for rules already stored in full form."""
        if not self.symmetric:
            return self
        shifts = []
        coeffs = []
        for s, c in zip(self.shifts, self.coefficients):
            shifts.extend((s, -s))
            coeffs.extend((c, -c))
        order = np.argsort(shifts, kind="stable")
        return ShiftRule(tuple(np.asarray(shifts)[order]),
                         tuple(np.asarray(coeffs)[order]),
                         symmetric=False, source=self.source)

    def to_json_dict(self) -> dict:
        return {"shifts": list(self.shifts),
                "coefficients": list(self.coefficients),
                "symmetric": self.symmetric,
                "source": self.source,
                "l1_norm": self.l1_norm}

    @classmethod
    def from_json_dict(cls, data: dict) -> "ShiftRule":
        return cls(tuple(data["shifts"]), tuple(data["coefficients"]),
                   bool(data["symmetric"]), str(data["source"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "ShiftRule":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class LinearSystem:
    """Dense constraint system ``matrix @ c = rhs`` over a list of shifts."""

    matrix: np.ndarray
    rhs: np.ndarray
    shifts: tuple[float, ...]
    symmetric: bool

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        if m.ndim != 2 or b.ndim != 1 or m.shape[0] != b.shape[0]:
            raise InvalidArgumentError("inconsistent system dimensions")
        if m.shape[1] != len(self.shifts):
            raise InvalidArgumentError("one matrix column per shift required")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "shifts", tuple(float(s) for s in self.shifts))


def shift_grid(kind: str, p: int, b: float) -> tuple[float, ...]:
    """Candidate shift grids.

    odd      2*B*p/(2P+1) for p = -P..P   (always contains zero)
    even     B*(2p-1)/(2P) for p = 1..P plus negations (never contains zero)
    uniform  p*B/P for p = -P..P
    """
    if p < 1:
        raise InvalidArgumentError("P must be >= 1")
    if not b > 0:
        raise InvalidArgumentError("B must be > 0")
    if kind == "odd":
        grid = [2.0 * b * k / (2 * p + 1) for k in range(-p, p + 1)]
    elif kind == "even":
        half = [b * (2 * k - 1) / (2 * p) for k in range(1, p + 1)]
        grid = sorted([-s for s in half] + half)
    elif kind == "uniform":
        grid = [k * b / p for k in range(-p, p + 1)]
    else:
        raise InvalidArgumentError(f"unknown grid kind {kind!r}")
    return tuple(grid)


def positive_shifts(grid) -> tuple[float, ...]:
    """Positive half of a symmetric grid, for symmetric assembly."""
    return tuple(s for s in grid if s > 0)


def assemble(omega: FrequencySet, shifts, symmetric: bool) -> LinearSystem:
    """Build the constraint system for the given frequencies and shifts.

    Symmetric form: one row per positive frequency with entries
    ``2 sin(w s)`` and right-hand side w; shifts must be the positive half.
    General form: per positive frequency a sine row (= w) and a cosine row
    (= 0), plus a zero-sum row when 0 is in Omega.
    """
    shifts = tuple(float(s) for s in shifts)
    pos = np.asarray(positive_part(omega), dtype=float)
    sh = np.asarray(shifts, dtype=float)
    if symmetric:
        if any(s <= 0 for s in shifts):
            raise InvalidArgumentError(
                "symmetric assembly requires strictly positive shifts")
        matrix = 2.0 * np.sin(np.outer(pos, sh))
        rhs = pos.copy()
        return LinearSystem(matrix, rhs, shifts, True)
    rows = []
    rhs_items = []
    for w in pos:
        rows.append(np.sin(w * sh))
        rhs_items.append(w)
        rows.append(np.cos(w * sh))
        rhs_items.append(0.0)
    if omega.has_zero:
        rows.append(np.ones_like(sh))
        rhs_items.append(0.0)
    matrix = np.vstack(rows) if rows else np.zeros((0, len(shifts)))
    return LinearSystem(matrix, np.asarray(rhs_items, dtype=float), shifts, False)


def feasible(system: LinearSystem, tol: float = DEFAULT_RANK_TOL) -> bool:
    """Solvability test: rank(A) == rank([A|b]) under an SVD threshold."""
    a = system.matrix
    b = system.rhs.reshape(-1, 1)
    if a.shape[0] == 0:
        return True
    aug = np.hstack([a, b])
    s_aug = np.linalg.svd(aug, compute_uv=False)
    cut = tol * (s_aug[0] if s_aug.size else 0.0)
    if a.shape[1] == 0:
        return bool(np.all(np.abs(system.rhs) <= max(cut, tol)))
    s_a = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s_a > cut)) == int(np.sum(s_aug > cut))


def solve_l2(system: LinearSystem) -> ShiftRule:
    """Minimum-L2-norm solution via the SVD pseudo-inverse."""
    if not feasible(system):
        raise NoSolutionError("shift-rule system is infeasible")
    coeffs, *_ = np.linalg.lstsq(system.matrix, system.rhs, rcond=DEFAULT_RANK_TOL)
    residual = np.max(np.abs(system.matrix @ coeffs - system.rhs)) \
        if system.rhs.size else 0.0
    if residual > 1e-9:
        raise NoSolutionError(
            f"least-squares residual {residual:.3e} exceeds 1e-9")
    return ShiftRule(system.shifts, tuple(coeffs.tolist()),
                     symmetric=system.symmetric, source="L2")


def verify(rule: ShiftRule, omega: FrequencySet, tol: float = 1e-8) -> float:
    """Max constraint residual ``|sum_p c_p exp(i w s_p) - i w|`` over Omega.

    Returns the residual itself; ``tol`` is the exactness threshold used by
    reporting callers (a rule is considered exact when the residual is below
    it).
    """
    full = rule.expanded()
    freqs = omega.as_array()
    if len(full) == 0:
        return float(np.max(np.abs(freqs))) if freqs.size else 0.0
    sh = np.asarray(full.shifts)
    co = np.asarray(full.coefficients)
    transfer = np.exp(1j * np.outer(freqs, sh)) @ co
    return float(np.max(np.abs(transfer - 1j * freqs)))


def apply_rule(rule: ShiftRule, f: SpectralFunction, theta: float) -> float:
    """Evaluate ``sum_p c_p f(theta + shift_p)`` exactly (no shot noise)."""
    full = rule.expanded()
    if len(full) == 0:
        return 0.0
    values = eval_function(f, theta + np.asarray(full.shifts))
    return float(np.dot(full.coefficients, values))


def dft_coefficients(rule: ShiftRule, max_harmonic: int) -> np.ndarray:
    """Transfer function ``sum_p c_p exp(i n s_p)`` at integer harmonics.

    Requires the expanded shifts to lie on a uniform grid inside [-pi, pi].
    Index k of the returned array holds harmonic ``n = k - max_harmonic``.
    For an exact rule the value at n in Omega is ``i n`` and the real parts
    vanish for symmetric rules (plain unnormalized DFT; any continuous-density
    normalization factor is up to the caller).
    """
    if max_harmonic < 0:
        raise InvalidArgumentError("max_harmonic must be >= 0")
    full = rule.expanded()
    sh = np.asarray(full.shifts)
    harmonics = np.arange(-max_harmonic, max_harmonic + 1)
    if len(full) == 0:
        return np.zeros(harmonics.size, dtype=complex)
    if np.max(np.abs(sh)) > np.pi + 1e-9:
        raise InvalidArgumentError("shift grid must lie inside [-pi, pi]")
    if sh.size > 1:
        gaps = np.diff(np.sort(sh))
        if np.max(gaps) - np.min(gaps) > 1e-9:
            raise InvalidArgumentError("shifts must lie on a uniform grid")
    co = np.asarray(full.coefficients)
    return np.exp(1j * np.outer(harmonics, sh)) @ co
