"""Noniterative estimation via the pattern-mixture reparametrization.

The four-pattern table is a saturated multinomial in the pattern-mixture
coordinates (pattern probabilities plus a within-pattern distribution per
observed block), so those estimates are immediate proportions.  Mapping them
back to the joint cell probabilities and the missingness probabilities gives
closed-form estimates for everything except the second-block missingness
probabilities for cases with the first variable missing (phi1), which solve
a K-equation linear system and may fall outside [0, 1].  The feasibility
classification of that system decides whether the closed form is the full
maximum-likelihood fit or an EM run is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import UndefinedConditionalError
from .table import (
    CellProbs,
    EstimatorKind,
    Feasibility,
    FitReport,
    MarginTable,
    Mechanism,
    ModelKind,
    PatternMixtureParams,
    loglik,
    validate,
)

# Rank decisions use a pivot threshold relative to the largest pivot; box
# membership allows this much slack before clamping; a relative least-squares
# residual above RESIDUAL_RTOL marks the system inconsistent.
PIVOT_RTOL = 1e-10
BOX_SLACK = 1e-9
RESIDUAL_RTOL = 1e-8


class FeasibilityStatus(str, Enum):
    UNIQUE = "unique-feasible"
    MULTIPLE = "multiple-feasible"
    INFEASIBLE = "infeasible"
    NOT_APPLICABLE = "not-applicable"  # J < K: no noniterative estimates
    UNIDENTIFIED = "unidentified"      # no cases with the first variable missing


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of the phi1 linear solve against the unit cube.

    ``phi1_point`` is a representative solution clamped to [0, 1]^J (present
    for the two feasible statuses); ``phi1_unconstrained`` is the raw
    algebraic solution (minimum-norm when underdetermined) whenever the
    system has one; ``solution_dim`` is the affine dimension of the solution
    set of the K equations.
    """

    status: FeasibilityStatus
    phi1_point: np.ndarray | None
    phi1_unconstrained: np.ndarray | None
    solution_dim: int
    residual: float = 0.0


def pattern_mixture_mle(table: MarginTable) -> PatternMixtureParams:
    """Proportions within each pattern plus the pattern probabilities.

    A pattern with zero total leaves its block None (undefined); callers
    decide whether that matters for what they need.
    """
    n = table.n
    pi = np.array([table.n0, table.n1, table.n2, table.n3], dtype=float) / n
    alpha0 = table.complete / table.n0 if table.n0 > 0 else None
    beta1 = table.z1_only / table.n1 if table.n1 > 0 else None
    gamma2 = table.z2_only / table.n2 if table.n2 > 0 else None
    return PatternMixtureParams(alpha0=alpha0, beta1=beta1, gamma2=gamma2, pi=pi)


def closed_form_theta(table: MarginTable) -> CellProbs:
    """Joint cell estimates from the monotone patterns.

    Each cell is the complete-case conditional of the second variable given
    the first, times the first-variable marginal pooled over the complete and
    first-only patterns.  This maximizes the block-monotone reduced
    loglikelihood.
    """
    rows0 = table.complete_row_totals()
    n01 = table.n0 + table.n1
    if n01 <= 0:
        raise UndefinedConditionalError("no cases with the first variable observed")
    bad = (rows0 == 0) & (table.z1_only > 0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise UndefinedConditionalError(
            f"row {j + 1} has margin-only cases but no complete cases; EM required")
    theta = np.zeros((table.J, table.K))
    for j in range(table.J):
        if rows0[j] == 0:
            continue  # empty row: no mass anywhere in the data, leave at 0
        theta[j] = (table.complete[j] / rows0[j]) * ((rows0[j] + table.z1_only[j]) / n01)
    return CellProbs(theta)


def closed_form_mechanism(table: MarginTable) -> tuple[float, np.ndarray]:
    """Direct estimates of phi and phi0.

    phi is the fraction of cases with the first variable missing; phi0[j] is
    the fraction of second-variable-missing cases among those with the first
    variable observed at level j.  Rows with no such cases get NaN (the value
    never enters any likelihood term).
    """
    phi = (table.n2 + table.n3) / table.n
    rows0 = table.complete_row_totals()
    den = rows0 + table.z1_only
    phi0 = np.divide(table.z1_only, den, out=np.full(table.J, np.nan), where=den > 0)
    return float(phi), phi0


def _canonical_point(A: np.ndarray, b: np.ndarray, x0: np.ndarray) -> np.ndarray | None:
    """Feasible point of {Ax=b} ∩ [0,1]^J closest to the cube center.

    Deterministic tie-break for the multiple-solutions case.  ``x0`` is a
    feasible starting point (from the phase-1 solve).
    """
    J = A.shape[1]
    center = np.full(J, 0.5)
    res = scipy.optimize.minimize(
        lambda x: float(np.sum((x - center) ** 2)),
        x0=np.clip(x0, 0.0, 1.0),
        jac=lambda x: 2.0 * (x - center),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * J,
        constraints=[{"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A}],
        options={"maxiter": 200, "ftol": 1e-14},
    )
    if res.success and np.max(np.abs(A @ res.x - b)) <= 1e-8:
        return np.clip(res.x, 0.0, 1.0)
    return None


def solve_phi1(theta_hat: CellProbs, table: MarginTable) -> FeasibilityResult:
    """Solve the K simultaneous equations for phi1 and classify the result.

    In the unknowns x_j = 1 - phi1_j the equations read
    ``sum_j x_j * theta_hat[j, k] = z2_only[k] / (n2 + n3)`` for each k.
    Classification: J < K admits no noniterative estimates; a full-rank
    square system has a unique algebraic solution, feasible or not; a
    consistent rank-deficient or underdetermined system leaves an affine
    solution set whose intersection with the unit cube is searched by a
    phase-1 linear program; an inconsistent system is infeasible outright.
    """
    J, K = table.J, table.K
    n23 = table.n2 + table.n3
    if n23 == 0:
        return FeasibilityResult(FeasibilityStatus.UNIDENTIFIED, None, None, J)
    if J < K:
        return FeasibilityResult(FeasibilityStatus.NOT_APPLICABLE, None, None, 0)

    A = theta_hat.theta.T.copy()            # (K, J), row k holds theta[:, k]
    b = table.z2_only / n23

    R = scipy.linalg.qr(A, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > PIVOT_RTOL * diag[0])) if diag.size and diag[0] > 0 else 0
    solution_dim = J - rank

    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.linalg.norm(A @ x_ls - b)) / max(float(np.linalg.norm(b)), 1.0)
    unconstrained = 1.0 - x_ls

    if resid > RESIDUAL_RTOL:
        return FeasibilityResult(
            FeasibilityStatus.INFEASIBLE, None, unconstrained, solution_dim, resid)

    if solution_dim == 0:
        inside = (x_ls >= -BOX_SLACK).all() and (x_ls <= 1 + BOX_SLACK).all()
        if inside:
            point = 1.0 - np.clip(x_ls, 0.0, 1.0)
            return FeasibilityResult(
                FeasibilityStatus.UNIQUE, point, unconstrained, 0, resid)
        return FeasibilityResult(
            FeasibilityStatus.INFEASIBLE, None, unconstrained, 0, resid)

    # Affine solution set: phase-1 feasibility over the cube.
    lp = scipy.optimize.linprog(
        c=np.zeros(J), A_eq=A, b_eq=b, bounds=[(0.0, 1.0)] * J, method="highs")
    if not lp.success:
        return FeasibilityResult(
            FeasibilityStatus.INFEASIBLE, None, unconstrained, solution_dim, resid)
    point = _canonical_point(A, b, lp.x)
    if point is None:
        point = np.clip(lp.x, 0.0, 1.0)
    return FeasibilityResult(
        FeasibilityStatus.MULTIPLE, 1.0 - point, unconstrained, solution_dim, resid)


_REPORT_STATUS = {
    FeasibilityStatus.UNIQUE: Feasibility.FEASIBLE,
    FeasibilityStatus.MULTIPLE: Feasibility.MULTIPLE,
    FeasibilityStatus.INFEASIBLE: Feasibility.INFEASIBLE,
    FeasibilityStatus.NOT_APPLICABLE: Feasibility.NOT_APPLICABLE,
    FeasibilityStatus.UNIDENTIFIED: Feasibility.NOT_APPLICABLE,
}


def fit_unrestricted_closed_form(table: MarginTable) -> FitReport:
    """Compose the noniterative pipeline into a fit report.

    On a feasible phi1 solve the report carries the full maximum-likelihood
    estimates and their loglikelihood.  On an infeasible or not-applicable
    solve, theta is still the reduced-likelihood maximizer but is flagged as
    not full ML, no mechanism point is claimed, and callers fall through to
    EM.  With no first-variable-missing cases at all, the monotone closed
    form is full ML and phi1 is reported as zero with an identifiability
    warning.
    """
    warnings = validate(table)
    theta = closed_form_theta(table)
    phi, phi0_raw = closed_form_mechanism(table)
    phi0 = np.nan_to_num(phi0_raw, nan=0.0)
    feas = solve_phi1(theta, table)

    mechanism = None
    ll = None
    if feas.status in (FeasibilityStatus.UNIQUE, FeasibilityStatus.MULTIPLE):
        mechanism = Mechanism.unrestricted(phi, phi0, feas.phi1_point)
        ll = loglik(table, theta, mechanism)
        if feas.status is FeasibilityStatus.MULTIPLE:
            warnings.append(
                f"phi1 solution set has dimension {feas.solution_dim}; "
                "reporting the point nearest the cube center")
    elif feas.status is FeasibilityStatus.UNIDENTIFIED:
        mechanism = Mechanism.unrestricted(phi, phi0, np.zeros(table.J))
        ll = loglik(table, theta, mechanism)
    else:
        warnings.append("closed-form phi1 lies outside [0, 1]; theta is the "
                        "reduced-likelihood estimate, not full ML (EM required)")

    return FitReport(
        model=ModelKind.UNRESTRICTED,
        theta=theta,
        mechanism=mechanism,
        loglik=ll,
        estimator=EstimatorKind.CLOSED_FORM,
        feasibility=_REPORT_STATUS[feas.status],
        iterations=0,
        converged=feas.status not in (FeasibilityStatus.INFEASIBLE,
                                      FeasibilityStatus.NOT_APPLICABLE),
        warnings=warnings,
        phi1_unconstrained=feas.phi1_unconstrained,
    )
