"""EM fits for the three model variants, plus the reduced-likelihood fit.

Each variant shares the same E step skeleton: the margin-only and
both-missing counts are fractionally distributed over the J x K cells under
the current parameters, then the M step recomputes cell probabilities as
filled-in proportions and updates whichever missingness probabilities the
variant iterates.  The probability of the first variable being missing and,
where applicable, the second-block probabilities for first-observed cases
are direct proportions fixed before the loop starts.

The hot loop lives in :mod:`bcmar._kernels` (compiled when available); this
module owns starting values, restarts, and report assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import UndefinedConditionalError
from .factored import FeasibilityStatus, closed_form_mechanism, closed_form_theta, \
    fit_unrestricted_closed_form
from .table import (
    CellProbs,
    EstimatorKind,
    Feasibility,
    FitReport,
    MarginTable,
    Mechanism,
    ModelKind,
    loglik_reduced,
    validate,
)

# Starting values at the boundary of [0, 1] are nudged inward by this much,
# once, before the loop; boundary estimates remain legal outputs.
START_EPS = 1e-8

_VARIANT_CODE = {
    ModelKind.UNRESTRICTED: 0,
    ModelKind.RESTRICTED: 1,
    ModelKind.RESTRICTED_MAR: 2,
}


@dataclass(frozen=True)
class EmConfig:
    """Convergence control for the EM loops.

    The loop stops when the largest absolute parameter change and the
    loglikelihood gain both drop below their tolerances, or at ``max_iters``.
    ``starts`` > 1 adds runs with jittered missingness starts; ``seed`` feeds
    the jitter stream.
    """

    max_iters: int = 10000
    tol_param: float = 1e-8
    tol_loglik: float = 1e-10
    starts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol_param <= 0 or self.tol_loglik <= 0:
            raise ValueError("tolerances must be positive")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")


@dataclass(frozen=True)
class EmState:
    """One E step's fractional allocations, for inspection and tests."""

    theta: CellProbs
    mech: Mechanism
    alloc_z1_only: np.ndarray   # (J, K), rows sum to the z1_only margin
    alloc_z2_only: np.ndarray   # (J, K), columns sum to the z2_only margin
    alloc_neither: np.ndarray   # (J, K), grand total is the neither count


def e_step_allocations(table: MarginTable, theta: CellProbs, mech: Mechanism) -> EmState:
    """Run a single E step at the given parameters."""
    variant = _VARIANT_CODE[mech.variant]
    aux = None
    if variant == 0:
        aux = mech.phi1.tolist()
    elif variant == 1:
        aux = mech.phi0.tolist()
    out = _kernels.e_step(
        variant, table.J, table.K,
        table.complete.ravel().astype(float).tolist(),
        table.z1_only.astype(float).tolist(),
        table.z2_only.astype(float).tolist(),
        float(table.neither),
        theta.theta.ravel().tolist(), aux,
        mech.phi1_scalar if variant == 2 else 0.0,
    )
    if out is None:
        raise ZeroDivisionError("E-step denominator is zero against a positive count")
    a1, a2, a3 = (np.asarray(a).reshape(table.J, table.K) for a in out)
    return EmState(theta=theta, mech=mech, alloc_z1_only=a1, alloc_z2_only=a2,
                   alloc_neither=a3)


def _table_args(table: MarginTable):
    return (
        table.complete.ravel().astype(float).tolist(),
        table.z1_only.astype(float).tolist(),
        table.z2_only.astype(float).tolist(),
        float(table.neither),
    )


def _start_theta(table: MarginTable) -> tuple[list[float], bool]:
    """Closed-form theta when defined, else uniform; True when closed form."""
    try:
        return closed_form_theta(table).theta.ravel().tolist(), True
    except UndefinedConditionalError:
        JK = table.J * table.K
        return [1.0 / JK] * JK, False


def _clip_start(values: np.ndarray) -> list[float]:
    return np.clip(np.nan_to_num(values, nan=0.5), START_EPS, 1.0 - START_EPS).tolist()


def _run_em(model: ModelKind, table: MarginTable, cfg: EmConfig) -> FitReport:
    variant = _VARIANT_CODE[model]
    warnings = validate(table)
    n0, n1, n2, n3 = _table_args(table)
    phi, phi0_raw = closed_form_mechanism(table)
    phi0 = np.nan_to_num(phi0_raw, nan=0.0)
    if np.isnan(phi0_raw).any():
        warnings.append("phi0 undefined for rows with no first-variable-observed cases")
    n23 = table.n2 + table.n3
    phi1_scalar = table.n3 / n23 if n23 > 0 else 0.0

    theta0, theta0_closed = _start_theta(table)
    aux0 = _clip_start(phi0_raw)
    uniform = [1.0 / (table.J * table.K)] * (table.J * table.K)

    def run(theta_start, aux_start):
        return _kernels.em_multinomial(
            variant, table.J, table.K, n0, n1, n2, n3,
            theta_start, aux_start, phi, phi0.tolist(), phi1_scalar,
            cfg.max_iters, cfg.tol_param, cfg.tol_loglik)

    result = run(theta0, aux0)
    if result[5] == _kernels.STATUS_DEGENERATE_START and theta0_closed:
        # A zero cell in the monotone start can zero out a pattern term that
        # the data support; the uniform start never does.
        result = run(uniform, aux0)

    runs = [result]
    if cfg.starts > 1 and result[5] != _kernels.STATUS_DEGENERATE_START:
        rng = np.random.Generator(np.random.Philox(key=cfg.seed))
        for _ in range(cfg.starts - 1):
            jitter = rng.uniform(0.05, 0.95, size=table.J)
            if variant == 2:
                t_extra = rng.dirichlet(np.ones(table.J * table.K)).tolist()
                runs.append(run(t_extra, aux0))
            else:
                runs.append(run(theta0, jitter.tolist()))

    finished = [r for r in runs if r[5] == _kernels.STATUS_OK]
    if not finished:
        best = runs[0]
        warnings.append("degenerate likelihood: some observed count has probability "
                        "zero at every start")
        theta = CellProbs(np.asarray(best[0]).reshape(table.J, table.K))
        mech = _final_mechanism(model, phi, phi0, best[1], phi1_scalar)
        return FitReport(
            model=model, theta=theta, mechanism=mech, loglik=best[2],
            estimator=EstimatorKind.EM, feasibility=Feasibility.NOT_APPLICABLE,
            iterations=best[3], converged=False, warnings=warnings,
            trace=list(enumerate(best[6])))

    best = max(finished, key=lambda r: r[2])
    if len(finished) > 1:
        thetas = [np.asarray(r[0]) for r in finished if r[4]]
        if len(thetas) > 1:
            spread = max(float(np.max(np.abs(t - thetas[0]))) for t in thetas[1:])
            if spread > 1e-4:
                warnings.append("multiple local maxima / ridge")
    if not best[4]:
        warnings.append(f"EM did not converge within {cfg.max_iters} iterations")

    theta = CellProbs(np.asarray(best[0]).reshape(table.J, table.K))
    mech = _final_mechanism(model, phi, phi0, best[1], phi1_scalar)
    return FitReport(
        model=model,
        theta=theta,
        mechanism=mech,
        loglik=best[2],
        estimator=EstimatorKind.EM,
        feasibility=Feasibility.NOT_APPLICABLE,
        iterations=best[3],
        converged=bool(best[4]),
        warnings=warnings,
        trace=list(enumerate(best[6])),
    )


def _final_mechanism(model, phi, phi0, aux, phi1_scalar) -> Mechanism:
    if model is ModelKind.UNRESTRICTED:
        return Mechanism.unrestricted(phi, phi0, np.asarray(aux))
    if model is ModelKind.RESTRICTED:
        return Mechanism.restricted(phi, np.asarray(aux))
    return Mechanism.restricted_mar(phi, phi0, phi1_scalar)


def em_unrestricted(table: MarginTable, cfg: EmConfig = EmConfig()) -> FitReport:
    """Full-likelihood EM for the unrestricted model.

    theta starts at the monotone closed form when defined (uniform
    otherwise); phi1 starts at the phi0 estimates nudged off the boundary.
    Extra starts jitter phi1 uniformly in (0.05, 0.95).
    """
    return _run_em(ModelKind.UNRESTRICTED, table, cfg)


def em_restricted(table: MarginTable, cfg: EmConfig = EmConfig()) -> FitReport:
    """EM for the restricted model, where one per-level probability governs
    second-variable missingness regardless of whether the first is missing."""
    return _run_em(ModelKind.RESTRICTED, table, cfg)


def em_restricted_mar(table: MarginTable, cfg: EmConfig = EmConfig()) -> FitReport:
    """EM for the restricted-MAR submodel.

    theta maximizes the ignorable likelihood over all four patterns (the
    mechanism factors cancel from the E step weights); every mechanism
    parameter has a direct closed form.
    """
    return _run_em(ModelKind.RESTRICTED_MAR, table, cfg)


def reduced_fit(table: MarginTable) -> FitReport:
    """Block-monotone reduced-likelihood fit: the closed-form theta with the
    reduced loglikelihood as its objective and no mechanism estimate."""
    warnings = validate(table)
    theta = closed_form_theta(table)
    return FitReport(
        model=ModelKind.UNRESTRICTED,
        theta=theta,
        mechanism=None,
        loglik=loglik_reduced(table, theta),
        estimator=EstimatorKind.REDUCED,
        feasibility=Feasibility.NOT_APPLICABLE,
        iterations=0,
        converged=True,
        warnings=warnings,
    )


def fit_table(table: MarginTable, model: ModelKind, cfg: EmConfig = EmConfig()) -> FitReport:
    """Fit one model, choosing the estimator the way the tables are built.

    For the unrestricted model the closed form runs first and stands when its
    phi1 solve is feasible; otherwise EM takes over and the report keeps the
    infeasibility classification from the attempt.  The submodels go straight
    to EM.
    """
    if model is ModelKind.UNRESTRICTED:
        try:
            closed = fit_unrestricted_closed_form(table)
        except UndefinedConditionalError:
            closed = None
        if closed is not None and closed.feasibility in (
                Feasibility.FEASIBLE, Feasibility.MULTIPLE):
            return closed
        if closed is not None and closed.feasibility is Feasibility.NOT_APPLICABLE \
                and closed.mechanism is not None:
            return closed  # block-monotone data: the closed form is full ML
        report = em_unrestricted(table, cfg)
        if closed is not None:
            report.feasibility = closed.feasibility
            report.phi1_unconstrained = closed.phi1_unconstrained
            for w in closed.warnings:
                if w not in report.warnings:
                    report.warnings.append(w)
        return report
    if model is ModelKind.RESTRICTED:
        return em_restricted(table, cfg)
    if model is ModelKind.RESTRICTED_MAR:
        return em_restricted_mar(table, cfg)
    raise ValueError(f"unknown model: {model}")
