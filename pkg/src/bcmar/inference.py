"""Likelihood-ratio tests, bootstrap standard errors, and the information-
matrix standard errors of the reduced-likelihood fit."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import gammaincc

from .em import EmConfig, em_restricted, em_restricted_mar, fit_table, reduced_fit
from .errors import BcmarError, BootstrapFailureError, NotNestedError, \
    SingularInformationError
from .table import (
    CellProbs,
    EstimatorKind,
    FitReport,
    MarginTable,
    ModelKind,
    validate,
)

STAT_FLOOR = -1e-6
MAX_FAILED_SHARE = 0.05


def n_parameters(model: ModelKind, J: int, K: int) -> int:
    """Free parameter count of each model variant.

    The unrestricted mechanism spends JK - 1 on the joint cells, 1 on the
    first-variable missingness, and J on each of the two second-variable
    vectors; tying those vectors (restricted) saves J, collapsing one of
    them to a constant (restricted MAR) saves J - 1.
    """
    if model is ModelKind.UNRESTRICTED:
        return J * K + 2 * J
    if model is ModelKind.RESTRICTED:
        return J * K + J
    if model is ModelKind.RESTRICTED_MAR:
        return J * K + J + 1
    raise ValueError(f"unknown model: {model}")


@dataclass(frozen=True)
class LrtResult:
    stat: float
    df: int
    p_value: float

    def to_dict(self) -> dict[str, Any]:
        return {"stat": self.stat, "df": self.df, "p_value": self.p_value}


def chi2_sf(stat: float, df: int) -> float:
    """Upper-tail chi-square probability via the regularized upper
    incomplete gamma function."""
    if df == 0:
        return 1.0 if stat <= 0 else 0.0
    return float(gammaincc(df / 2.0, stat / 2.0))


def lrt(full: FitReport, restricted: FitReport) -> LrtResult:
    """Likelihood-ratio test of a restricted variant against the model it is
    nested in, on the chi-square reference with df = difference in free
    parameter counts."""
    nested_pairs = {
        (ModelKind.UNRESTRICTED, ModelKind.RESTRICTED),
        (ModelKind.UNRESTRICTED, ModelKind.RESTRICTED_MAR),
    }
    pair = (full.model, restricted.model)
    if pair not in nested_pairs and full.model is not restricted.model:
        raise NotNestedError(f"{restricted.model.value} is not nested in {full.model.value}")
    if not (full.converged and restricted.converged):
        raise BcmarError("both fits must have converged before testing")
    if full.loglik is None or restricted.loglik is None:
        raise BcmarError("both fits must carry a loglikelihood")

    J, K = full.theta.J, full.theta.K
    df = n_parameters(full.model, J, K) - n_parameters(restricted.model, J, K)
    stat = -2.0 * (restricted.loglik - full.loglik)
    if stat < STAT_FLOOR:
        raise BcmarError(
            f"negative LRT statistic ({stat:.3g}): the nested fit beat the full fit, "
            "which signals a failed maximization")
    stat = max(stat, 0.0)
    return LrtResult(stat=stat, df=df, p_value=chi2_sf(stat, df))


@dataclass
class BootstrapResult:
    """Per-parameter standard deviations across multinomial resamples.

    ``se`` maps parameter-block names to arrays shaped like the parameters
    ("theta" (J, K); "phi" scalar; "phi0"/"phi1" (J,), with "phi1" scalar
    for the restricted-MAR model and "phi_shared" replacing both for the
    restricted model).  ``infeasible_fraction`` is the share of replicates
    where the closed form failed and EM produced the estimate (unrestricted
    model only; the submodels are always iterative).
    """

    model: ModelKind | str
    replicates: int
    se: dict[str, Any]
    infeasible_fraction: float
    seed: int
    n_failed: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value if isinstance(self.model, ModelKind) else self.model,
            "replicates": self.replicates,
            "se": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                   for k, v in self.se.items()},
            "infeasible_fraction": self.infeasible_fraction,
            "seed": self.seed,
            "n_failed": self.n_failed,
            "warnings": list(self.warnings),
        }


def _resample(table: MarginTable, rng: np.random.Generator) -> MarginTable:
    """Draw n cases i.i.d. from the empirical distribution over the observed
    cells (complete cells, both margins, and the both-missing cell)."""
    J, K = table.J, table.K
    counts = np.concatenate([
        table.complete.ravel(), table.z1_only, table.z2_only, [table.neither]])
    draw = rng.multinomial(table.n, counts / table.n)
    return MarginTable(
        complete=draw[: J * K].reshape(J, K),
        z1_only=draw[J * K: J * K + J],
        z2_only=draw[J * K + J: J * K + J + K],
        neither=int(draw[-1]),
    )


def _replicate_params(model: ModelKind, rep: MarginTable, cfg: EmConfig):
    """Refit one resampled table; returns (flat parameter vector, used_em).

    Parameters that the replicate cannot identify are NaN so they drop out
    of that replicate's contribution.
    """
    J, K = rep.J, rep.K
    if model is ModelKind.UNRESTRICTED:
        report = fit_table(rep, model, cfg)
    elif model is ModelKind.RESTRICTED:
        report = em_restricted(rep, cfg)
    elif model is ModelKind.RESTRICTED_MAR:
        report = em_restricted_mar(rep, cfg)
    else:
        report = reduced_fit(rep)
    used_em = report.estimator is EstimatorKind.EM

    out = [report.theta.theta.ravel()]
    if model != "reduced":
        mech = report.mechanism
        row_seen = rep.complete_row_totals() + rep.z1_only
        n23 = rep.n2 + rep.n3
        phi0 = np.where(row_seen > 0, mech.phi0, np.nan)
        if model is ModelKind.RESTRICTED:
            shared = np.where(row_seen + n23 > 0, mech.phi0, np.nan)
            out.extend([np.array([mech.phi]), shared])
        elif model is ModelKind.RESTRICTED_MAR:
            phi1 = mech.phi1_scalar if n23 > 0 else np.nan
            out.extend([np.array([mech.phi]), phi0, np.array([phi1])])
        else:
            phi1 = mech.phi1 if n23 > 0 else np.full(J, np.nan)
            out.extend([np.array([mech.phi]), phi0, phi1])
    return np.concatenate(out), used_em


def _unpack_se(model: ModelKind, J: int, K: int, sd: np.ndarray) -> dict[str, Any]:
    se: dict[str, Any] = {"theta": sd[: J * K].reshape(J, K)}
    at = J * K
    if model == "reduced":
        return se
    se["phi"] = float(sd[at])
    at += 1
    if model is ModelKind.RESTRICTED:
        se["phi_shared"] = sd[at: at + J]
    elif model is ModelKind.RESTRICTED_MAR:
        se["phi0"] = sd[at: at + J]
        se["phi1"] = float(sd[at + J])
    else:
        se["phi0"] = sd[at: at + J]
        se["phi1"] = sd[at + J: at + 2 * J]
    return se


def bootstrap_se(
    table: MarginTable,
    model: ModelKind | str,
    B: int,
    seed: int,
    cfg: EmConfig = EmConfig(),
    threads: int | None = None,
) -> BootstrapResult:
    """Bootstrap standard errors by refitting B multinomial resamples.

    Each replicate draws its own counter-based substream
    (``Philox(seed).jumped(i)``), so results are bit-identical for a given
    (seed, B) regardless of how many worker threads execute the replicates.
    Replicates that fail outright are dropped and tallied; more than 5% of B
    failing is an error.  ``model`` may also be ``"reduced"`` for the
    reduced-likelihood fit (theta only).
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    validate(table)
    if model != "reduced":
        model = ModelKind(model)
    if threads is None:
        threads = int(os.environ.get("BCMAR_THREADS", "1") or 1)
    threads = max(1, threads)

    base = np.random.Philox(key=seed)

    def one(i: int):
        rng = np.random.Generator(base.jumped(i))
        rep = _resample(table, rng)
        try:
            return _replicate_params(model, rep, cfg)
        except BcmarError:
            return None

    if threads == 1:
        results = [one(i) for i in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(B)))

    ok = [r for r in results if r is not None]
    n_failed = B - len(ok)
    if n_failed > MAX_FAILED_SHARE * B:
        raise BootstrapFailureError(
            f"{n_failed} of {B} bootstrap replicates failed to fit")

    params = np.vstack([p for p, _ in ok])
    used_em = np.array([u for _, u in ok])
    warnings = []
    mask = ~np.isnan(params)
    counts = mask.sum(axis=0)
    sums = np.where(mask, params, 0.0).sum(axis=0)
    means = sums / np.maximum(counts, 1)
    sumsq = np.where(mask, (params - means) ** 2, 0.0).sum(axis=0)
    sd = np.where(counts >= 2, np.sqrt(sumsq / np.maximum(counts - 1, 1)), np.nan)
    if np.isnan(sd).any():
        warnings.append("some parameters were unidentified in every replicate")
    infeasible = float(np.mean(used_em)) if model is ModelKind.UNRESTRICTED else 0.0

    return BootstrapResult(
        model=model if isinstance(model, ModelKind) else model,
        replicates=B,
        se=_unpack_se(model, table.J, table.K, sd),
        infeasible_fraction=infeasible,
        seed=seed,
        n_failed=n_failed,
        warnings=warnings,
    )


def _reduced_ll_free(table: MarginTable, free: np.ndarray) -> float:
    """Reduced loglikelihood on the minimal (JK-1)-parameter chart; -inf when
    a positive count meets a nonpositive probability."""
    theta = np.append(free, 1.0 - free.sum()).reshape(table.J, table.K)
    rows = theta.sum(axis=1)
    c0 = table.complete.ravel()
    t0 = theta.ravel()
    pos = c0 > 0
    if (t0[pos] <= 0).any():
        return -np.inf
    ll = float(np.sum(c0[pos] * np.log(t0[pos])))
    pos1 = table.z1_only > 0
    if (rows[pos1] <= 0).any():
        return -np.inf
    ll += float(np.sum(table.z1_only[pos1] * np.log(rows[pos1])))
    return ll


def reduced_information_se(table: MarginTable, theta_hat: CellProbs) -> np.ndarray:
    """Asymptotic standard errors of the reduced-likelihood estimates.

    Forms the negative Hessian of the reduced loglikelihood at ``theta_hat``
    by central finite differences on the minimal simplex chart (the last
    cell is one minus the rest), inverts it, and maps the covariance to all
    JK cells by the delta method.  Returns a (J, K) array of SEs.
    """
    validate(table)
    flat = theta_hat.theta.ravel()
    m = flat.size - 1
    h0 = np.cbrt(np.finfo(float).eps)
    steps = h0 * (1.0 + np.abs(flat[:-1]))
    if (flat < 2 * np.append(steps, steps.max())).any():
        raise SingularInformationError(
            "theta has cells too close to the boundary for finite differences",
            direction=np.flatnonzero(flat < 2 * np.append(steps, steps.max())))

    p0 = flat[:-1].copy()

    def f(p):
        return _reduced_ll_free(table, p)

    H = np.empty((m, m))
    f0 = f(p0)
    for i in range(m):
        hi = steps[i]
        ei = np.zeros(m)
        ei[i] = hi
        H[i, i] = (f(p0 + ei) - 2.0 * f0 + f(p0 - ei)) / (hi * hi)
        for j in range(i + 1, m):
            hj = steps[j]
            ej = np.zeros(m)
            ej[j] = hj
            H[i, j] = H[j, i] = (
                f(p0 + ei + ej) - f(p0 + ei - ej) - f(p0 - ei + ej) + f(p0 - ei - ej)
            ) / (4.0 * hi * hj)

    info = -0.5 * (H + H.T)
    eigval, eigvec = np.linalg.eigh(info)
    if eigval[0] <= 1e-10 * max(eigval[-1], 1.0):
        raise SingularInformationError(
            "observed information is singular", direction=eigvec[:, 0])
    cov = eigvec @ np.diag(1.0 / eigval) @ eigvec.T
    se = np.empty(m + 1)
    se[:-1] = np.sqrt(np.diag(cov))
    se[-1] = np.sqrt(float(np.ones(m) @ cov @ np.ones(m)))
    return se.reshape(table.J, table.K)
