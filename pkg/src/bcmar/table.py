"""Data model for J x K tables with supplemental margins.

The observed data for two categorical variables that can each be missing
fall into four patterns: both observed (a J x K table of complete cases),
first observed only (a J-vector margin), second observed only (a K-vector
margin), and both missing (a single count).  This module holds the
containers for those counts, for the cell probabilities and missingness
probabilities of the fitted models, and the exact observed-data
loglikelihood evaluators.

Throughout, row index j refers to the first variable and column index k to
the second; indices are 0-based in code and 1-based in printed reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .errors import (
    DegenerateLikelihoodError,
    DimensionMismatchError,
    InvalidProbabilityError,
    NegativeCountError,
    TableValidationError,
    ZeroTotalError,
)

SIMPLEX_ATOL = 1e-12
PROB_ATOL = 1e-12


class ModelKind(str, Enum):
    """Fitted model variants, in decreasing order of mechanism flexibility."""

    UNRESTRICTED = "unrestricted-bcmar"
    RESTRICTED = "restricted-bcmar"
    RESTRICTED_MAR = "restricted-mar"


class EstimatorKind(str, Enum):
    CLOSED_FORM = "closed-form"
    EM = "em"
    REDUCED = "reduced-likelihood"


class Feasibility(str, Enum):
    """Report-level classification of the closed-form mechanism solve."""

    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MULTIPLE = "multiple-solutions"
    NOT_APPLICABLE = "not-applicable"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _as_count_array(x, shape_name: str, ndim: int) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != ndim:
        raise DimensionMismatchError(f"{shape_name} must be {ndim}-dimensional, got shape {a.shape}")
    if a.size and not np.issubdtype(a.dtype, np.integer):
        rounded = np.rint(np.asarray(a, dtype=float))
        if not np.array_equal(rounded, np.asarray(a, dtype=float)):
            raise TableValidationError(f"{shape_name} must hold integer counts")
        a = rounded
    return _freeze(a.astype(np.int64))


@dataclass(frozen=True)
class MarginTable:
    """Observed counts for the four missing-data patterns.

    Attributes:
        complete: (J, K) counts with both variables observed.
        z1_only:  (J,) counts with the first variable observed only.
        z2_only:  (K,) counts with the second variable observed only.
        neither:  count with both variables missing.
    """

    complete: np.ndarray
    z1_only: np.ndarray
    z2_only: np.ndarray
    neither: int

    def __post_init__(self):
        object.__setattr__(self, "complete", _as_count_array(self.complete, "complete", 2))
        object.__setattr__(self, "z1_only", _as_count_array(self.z1_only, "z1_only", 1))
        object.__setattr__(self, "z2_only", _as_count_array(self.z2_only, "z2_only", 1))
        object.__setattr__(self, "neither", int(self.neither))
        J, K = self.complete.shape
        if self.z1_only.shape != (J,):
            raise DimensionMismatchError(
                f"z1_only has length {self.z1_only.shape[0]}, expected J={J}")
        if self.z2_only.shape != (K,):
            raise DimensionMismatchError(
                f"z2_only has length {self.z2_only.shape[0]}, expected K={K}")

    @property
    def J(self) -> int:
        return self.complete.shape[0]

    @property
    def K(self) -> int:
        return self.complete.shape[1]

    @property
    def n0(self) -> int:
        return int(self.complete.sum())

    @property
    def n1(self) -> int:
        return int(self.z1_only.sum())

    @property
    def n2(self) -> int:
        return int(self.z2_only.sum())

    @property
    def n3(self) -> int:
        return self.neither

    @property
    def n(self) -> int:
        return self.n0 + self.n1 + self.n2 + self.n3

    def complete_row_totals(self) -> np.ndarray:
        return self.complete.sum(axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "J": self.J,
            "K": self.K,
            "complete": self.complete.tolist(),
            "z1_only": self.z1_only.tolist(),
            "z2_only": self.z2_only.tolist(),
            "neither": int(self.neither),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MarginTable":
        table = cls(
            complete=d["complete"],
            z1_only=d["z1_only"],
            z2_only=d["z2_only"],
            neither=d["neither"],
        )
        if "J" in d and int(d["J"]) != table.J:
            raise DimensionMismatchError(f"declared J={d['J']} but complete block has {table.J} rows")
        if "K" in d and int(d["K"]) != table.K:
            raise DimensionMismatchError(f"declared K={d['K']} but complete block has {table.K} columns")
        return table

    @classmethod
    def from_json(cls, text: str) -> "MarginTable":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validate(table: MarginTable) -> list[str]:
    """Check the count invariants; return identifiability warnings.

    Raises NegativeCountError or ZeroTotalError when a structural invariant
    fails.  Dimension mismatches are raised at construction.  The returned
    warnings flag configurations where some mechanism parameter cannot be
    identified from the data (the fits still run; downstream reports carry
    these notes).
    """
    if (
        (table.complete < 0).any()
        or (table.z1_only < 0).any()
        or (table.z2_only < 0).any()
        or table.neither < 0
    ):
        raise NegativeCountError("all counts must be nonnegative")
    if table.n < 1:
        raise ZeroTotalError("table holds no observations")

    warnings: list[str] = []
    if table.n2 == 0 and table.neither == 0:
        warnings.append("block monotone; phi1 unidentified")
    rows0 = table.complete_row_totals()
    for j in range(table.J):
        if rows0[j] == 0:
            warnings.append(f"no complete cases in row {j + 1}")
    return warnings


@dataclass(frozen=True)
class CellProbs:
    """Joint cell probabilities on the (J*K - 1)-simplex."""

    theta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.theta, dtype=float)
        if a.ndim != 2:
            raise InvalidProbabilityError(f"theta must be a matrix, got shape {a.shape}")
        if (a < -PROB_ATOL).any() or (a > 1 + PROB_ATOL).any():
            raise InvalidProbabilityError("theta entries must lie in [0, 1]")
        total = float(a.sum())
        if abs(total - 1.0) > SIMPLEX_ATOL:
            raise InvalidProbabilityError(f"theta sums to {total!r}, not 1 within {SIMPLEX_ATOL}")
        object.__setattr__(self, "theta", _freeze(np.clip(a, 0.0, 1.0)))

    @classmethod
    def uniform(cls, J: int, K: int) -> "CellProbs":
        return cls(np.full((J, K), 1.0 / (J * K)))

    @property
    def J(self) -> int:
        return self.theta.shape[0]

    @property
    def K(self) -> int:
        return self.theta.shape[1]

    def row_marginals(self) -> np.ndarray:
        return self.theta.sum(axis=1)

    def col_marginals(self) -> np.ndarray:
        return self.theta.sum(axis=0)


def _check_probs(name: str, a: np.ndarray) -> np.ndarray:
    if (a < -PROB_ATOL).any() or (a > 1 + PROB_ATOL).any():
        raise InvalidProbabilityError(f"{name} entries must lie in [0, 1]")
    return _freeze(np.clip(a, 0.0, 1.0))


@dataclass(frozen=True)
class Mechanism:
    """Missingness probabilities for one model variant.

    ``phi`` is the probability that the first variable is missing; ``phi0[j]``
    and ``phi1[j]`` are the probabilities that the second variable is missing
    given first-variable level j, for cases with the first variable observed
    and missing respectively.  The restricted variant ties phi0 == phi1; the
    restricted-MAR variant makes phi1 constant across levels.  ``phi1`` is
    always materialized as a length-J vector so the loglikelihood evaluator
    is variant-agnostic.
    """

    variant: ModelKind
    phi: float
    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        phi = float(self.phi)
        if not -PROB_ATOL <= phi <= 1 + PROB_ATOL:
            raise InvalidProbabilityError("phi must lie in [0, 1]")
        object.__setattr__(self, "phi", min(max(phi, 0.0), 1.0))
        phi0 = np.asarray(self.phi0, dtype=float)
        phi1 = np.asarray(self.phi1, dtype=float)
        if phi0.shape != phi1.shape or phi0.ndim != 1:
            raise DimensionMismatchError("phi0 and phi1 must be vectors of length J")
        object.__setattr__(self, "phi0", _check_probs("phi0", phi0))
        object.__setattr__(self, "phi1", _check_probs("phi1", phi1))
        if self.variant is ModelKind.RESTRICTED and not np.array_equal(self.phi0, self.phi1):
            raise InvalidProbabilityError("restricted variant requires phi0 == phi1")
        if self.variant is ModelKind.RESTRICTED_MAR and self.phi1.size and (
            np.ptp(self.phi1) != 0.0
        ):
            raise InvalidProbabilityError("restricted-MAR variant requires constant phi1")

    @classmethod
    def unrestricted(cls, phi: float, phi0, phi1) -> "Mechanism":
        return cls(ModelKind.UNRESTRICTED, phi, np.asarray(phi0, float), np.asarray(phi1, float))

    @classmethod
    def restricted(cls, phi: float, phi_shared) -> "Mechanism":
        shared = np.asarray(phi_shared, dtype=float)
        return cls(ModelKind.RESTRICTED, phi, shared, shared.copy())

    @classmethod
    def restricted_mar(cls, phi: float, phi0, phi1_scalar: float) -> "Mechanism":
        phi0 = np.asarray(phi0, dtype=float)
        return cls(ModelKind.RESTRICTED_MAR, phi, phi0, np.full(phi0.shape, float(phi1_scalar)))

    @property
    def J(self) -> int:
        return self.phi0.shape[0]

    @property
    def phi_shared(self) -> np.ndarray:
        if self.variant is not ModelKind.RESTRICTED:
            raise ValueError("phi_shared is defined for the restricted variant only")
        return self.phi0

    @property
    def phi1_scalar(self) -> float:
        if self.variant is not ModelKind.RESTRICTED_MAR:
            raise ValueError("phi1_scalar is defined for the restricted-MAR variant only")
        return float(self.phi1[0])

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"variant": self.variant.value, "phi": self.phi}
        if self.variant is ModelKind.RESTRICTED:
            d["phi_shared"] = self.phi0.tolist()
        else:
            d["phi0"] = self.phi0.tolist()
            if self.variant is ModelKind.RESTRICTED_MAR:
                d["phi1"] = self.phi1_scalar
            else:
                d["phi1"] = self.phi1.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Mechanism":
        variant = ModelKind(d["variant"])
        if variant is ModelKind.RESTRICTED:
            return cls.restricted(d["phi"], d["phi_shared"])
        if variant is ModelKind.RESTRICTED_MAR:
            return cls.restricted_mar(d["phi"], d["phi0"], d["phi1"])
        return cls.unrestricted(d["phi"], d["phi0"], d["phi1"])


@dataclass(frozen=True)
class PatternMixtureParams:
    """ML estimates of the pattern-mixture factorization.

    A block is None when its pattern total is zero, in which case the
    within-pattern distribution is undefined; ``pi`` (the pattern
    probabilities) is always present.
    """

    alpha0: np.ndarray | None
    beta1: np.ndarray | None
    gamma2: np.ndarray | None
    pi: np.ndarray

    def __post_init__(self):
        for name in ("alpha0", "beta1", "gamma2"):
            block = getattr(self, name)
            if block is None:
                continue
            block = np.asarray(block, dtype=float)
            if abs(float(block.sum()) - 1.0) > SIMPLEX_ATOL:
                raise InvalidProbabilityError(f"{name} must sum to 1")
            object.__setattr__(self, name, _check_probs(name, block))
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (4,) or abs(float(pi.sum()) - 1.0) > SIMPLEX_ATOL:
            raise InvalidProbabilityError("pi must be 4 pattern probabilities summing to 1")
        object.__setattr__(self, "pi", _check_probs("pi", pi))


@dataclass
class FitReport:
    """Everything a fit produces: estimates, objective, and provenance."""

    model: ModelKind
    theta: CellProbs
    mechanism: Mechanism | None
    loglik: float | None
    estimator: EstimatorKind
    feasibility: Feasibility
    iterations: int
    converged: bool
    warnings: list[str] = field(default_factory=list)
    se: Any | None = None
    trace: list[tuple[int, float]] | None = None
    phi1_unconstrained: np.ndarray | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "model": self.model.value,
            "theta": self.theta.theta.tolist(),
            "mechanism": self.mechanism.to_dict() if self.mechanism is not None else None,
            "loglik": self.loglik,
            "estimator": self.estimator.value,
            "feasibility": self.feasibility.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "warnings": list(self.warnings),
        }
        if self.phi1_unconstrained is not None:
            d["phi1_unconstrained"] = np.asarray(self.phi1_unconstrained).tolist()
        if self.se is not None:
            d["se"] = self.se.to_dict() if hasattr(self.se, "to_dict") else self.se
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FitReport":
        return cls(
            model=ModelKind(d["model"]),
            theta=CellProbs(np.asarray(d["theta"], dtype=float)),
            mechanism=Mechanism.from_dict(d["mechanism"]) if d.get("mechanism") else None,
            loglik=d.get("loglik"),
            estimator=EstimatorKind(d["estimator"]),
            feasibility=Feasibility(d["feasibility"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            warnings=list(d.get("warnings", [])),
            se=d.get("se"),
            phi1_unconstrained=(
                np.asarray(d["phi1_unconstrained"], dtype=float)
                if d.get("phi1_unconstrained") is not None
                else None
            ),
        )


def _xlogy_sum(counts: np.ndarray, probs: np.ndarray, what: str) -> float:
    """Sum of c*log(p) with the 0*log(0)=0 convention.

    Raises DegenerateLikelihoodError when a strictly positive count meets a
    zero probability (the loglikelihood is -inf there, never a silent NaN).
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    pos = counts > 0
    if not pos.any():
        return 0.0
    if (probs[pos] <= 0.0).any():
        raise DegenerateLikelihoodError(
            f"positive {what} count multiplies log(0); loglikelihood is -inf")
    return float(np.sum(counts[pos] * np.log(probs[pos])))


def loglik(table: MarginTable, theta: CellProbs, mech: Mechanism) -> float:
    """Observed-data loglikelihood of the four-pattern table.

    The four pattern contributions are: complete cells at
    theta_jk*(1-phi)*(1-phi0_j); first-only margins at row(theta)_j*(1-phi)*phi0_j;
    second-only margins at phi * sum_j theta_jk*(1-phi1_j); and the
    both-missing count at phi * sum_j row(theta)_j*phi1_j.  Restricted
    variants evaluate the same expression with their tied phi vectors.
    """
    if theta.theta.shape != (table.J, table.K) or mech.J != table.J:
        raise DimensionMismatchError("table, theta, and mechanism dimensions disagree")
    t = theta.theta
    rows = t.sum(axis=1)
    phi, phi0, phi1 = mech.phi, mech.phi0, mech.phi1

    ll = _xlogy_sum(table.complete, t * (1 - phi) * (1 - phi0)[:, None], "complete")
    ll += _xlogy_sum(table.z1_only, rows * (1 - phi) * phi0, "z1-only")
    p2 = phi * ((1 - phi1)[:, None] * t).sum(axis=0)
    ll += _xlogy_sum(table.z2_only, p2, "z2-only")
    p3 = phi * float(np.dot(phi1, rows))
    ll += _xlogy_sum(np.asarray([table.neither]), np.asarray([p3]), "both-missing")
    return ll


def loglik_reduced(table: MarginTable, theta: CellProbs) -> float:
    """Block-monotone reduced loglikelihood: complete cells plus first-only
    margins; the two patterns with the first variable missing contribute
    nothing and no mechanism parameters appear."""
    if theta.theta.shape != (table.J, table.K):
        raise DimensionMismatchError("table and theta dimensions disagree")
    t = theta.theta
    ll = _xlogy_sum(table.complete, t, "complete")
    ll += _xlogy_sum(table.z1_only, t.sum(axis=1), "z1-only")
    return ll


def loglik_components(table: MarginTable, theta: CellProbs, mech: Mechanism) -> dict[str, float]:
    """The three-way split of the observed loglikelihood.

    Returns the reduced (mechanism-free) part, the mechanism-only part, and
    the residual carried by the two patterns with the first variable missing.
    The mechanism part collects every first-variable missingness factor plus
    the second-variable factors of the monotone patterns, so it depends on the
    phi's alone; the residual couples theta and phi1.  The three parts sum to
    ``loglik`` exactly.
    """
    t = theta.theta
    rows = t.sum(axis=1)
    phi, phi0, phi1 = mech.phi, mech.phi0, mech.phi1

    reduced = loglik_reduced(table, theta)
    mech_part = _xlogy_sum(
        np.asarray([table.n0 + table.n1, table.n2 + table.n3]),
        np.asarray([1 - phi, phi]),
        "first-variable pattern",
    )
    mech_part += _xlogy_sum(table.complete_row_totals(), 1 - phi0, "complete")
    mech_part += _xlogy_sum(table.z1_only, phi0, "z1-only")
    residual = _xlogy_sum(table.z2_only, ((1 - phi1)[:, None] * t).sum(axis=0), "z2-only")
    residual += _xlogy_sum(
        np.asarray([table.neither]), np.asarray([float(np.dot(phi1, rows))]), "both-missing")
    return {"reduced": reduced, "mechanism": mech_part, "rest": residual}
