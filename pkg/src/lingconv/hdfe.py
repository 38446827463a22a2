"""Event-study DiD estimation with high-dimensional fixed effects.

Fixed effects are absorbed by alternating projections: cycle over the FE
dimensions subtracting group means from the outcome and every regressor
until the largest per-entry change in a full cycle falls below tolerance.
The demeaned system is then solved by OLS with a CR1 cluster-robust
sandwich covariance (clusters = journals in the headline specification).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import (
    MissingFlag,
    MissingScore,
    NoConvergence,
    RankDeficient,
    SingleYearPanel,
    TooFewClusters,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
ABSORB_VAR_TOL = 1e-12

FE_DIMENSIONS = ("country", "field", "journal", "year", "journal_x_year")


@dataclass
class FixedEffectSpec:
    dimensions: tuple[str, ...] = FE_DIMENSIONS
    tol: float = DEFAULT_TOL
    max_iterations: int = DEFAULT_MAX_ITER
    drop_singletons: bool = False

    def __post_init__(self):
        if not self.dimensions:
            raise ValueError("at least one FE dimension required")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class DesignMatrix:
    y: np.ndarray  # (n,)
    X: np.ndarray  # (n, k) float64
    columns: list[str]
    fe_codes: dict[str, np.ndarray]  # dimension -> int codes (n,)
    fe_levels: dict[str, int]
    cluster_codes: np.ndarray
    n_clusters: int

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]


@dataclass
class FitResult:
    params: pd.DataFrame  # term, estimate, se, t, p, ci_low, ci_high
    vcov: np.ndarray
    residuals: np.ndarray
    n_obs: int
    n_clusters: int
    iterations: int
    dof_convention: str
    k_model: int
    k_absorbed: int
    dropped_columns: list[str]
    critical_value: float

    def coef(self, term: str) -> float:
        return float(self.params.set_index("term").loc[term, "estimate"])

    def se(self, term: str) -> float:
        return float(self.params.set_index("term").loc[term, "se"])


def _encode(values) -> tuple[np.ndarray, int]:
    codes, uniques = pd.factorize(np.asarray(values), sort=True)
    return codes.astype(np.int64), len(uniques)


def build_design(
    frame: pd.DataFrame,
    reference_year: int = 2022,
    fe_dimensions: Sequence[str] = FE_DIMENSIONS,
) -> DesignMatrix:
    """Assemble the regression system from a panel frame.

    Expected columns: similarity, genai, n_authors, has_eng_coauthor,
    country, field, journal, year. Interaction columns genai_x_<year> are
    built for every sample year except the reference year.
    """
    if frame["similarity"].isna().any():
        missing = frame.loc[frame["similarity"].isna(), "pub_id"].head(5).tolist()
        raise MissingScore(f"cells without similarity score, e.g. {missing}")
    if frame["genai"].isna().any():
        raise MissingFlag("cells without GenAI flag")
    years = sorted(frame["year"].unique())
    if len(years) < 2:
        raise SingleYearPanel(f"panel has a single year {years}")

    y = frame["similarity"].to_numpy(dtype=np.float64)
    genai = frame["genai"].to_numpy(dtype=np.float64)
    cols = {"genai": genai}
    for yr in years:
        if yr == reference_year:
            continue
        cols[f"genai_x_{yr}"] = genai * (frame["year"].to_numpy() == yr)
    cols["n_authors"] = frame["n_authors"].to_numpy(dtype=np.float64)
    cols["eng_coauthor"] = frame["has_eng_coauthor"].to_numpy(dtype=np.float64)
    X = np.column_stack(list(cols.values()))

    jxt = frame["journal"].astype(str) + "#" + frame["year"].astype(str)
    raw = {
        "country": frame["country"],
        "field": frame["field"],
        "journal": frame["journal"],
        "year": frame["year"],
        "journal_x_year": jxt,
    }
    fe_codes = {}
    fe_levels = {}
    for dim in fe_dimensions:
        fe_codes[dim], fe_levels[dim] = _encode(raw[dim])

    cluster_codes, n_clusters = _encode(frame["journal"])
    return DesignMatrix(
        y=y,
        X=X,
        columns=list(cols),
        fe_codes=fe_codes,
        fe_levels=fe_levels,
        cluster_codes=cluster_codes,
        n_clusters=n_clusters,
    )


def demean(
    M: np.ndarray,
    fe_codes: dict[str, np.ndarray],
    fe_levels: dict[str, int],
    tol: float = DEFAULT_TOL,
    max_iterations: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, int]:
    """Alternating-projection group demeaning of every column of ``M``.

    Returns the demeaned copy and the number of full cycles. Convergence is
    on the maximum absolute per-entry adjustment within a cycle.
    """
    M = np.array(M, dtype=np.float64, order="C")
    if M.ndim == 1:
        M = M[:, None]
    dims = list(fe_codes)
    counts = {
        dim: np.bincount(fe_codes[dim], minlength=fe_levels[dim]).astype(np.float64)
        for dim in dims
    }
    for dim in dims:
        # singleton groups demean to zero; empty groups cannot occur after factorize
        counts[dim][counts[dim] == 0] = 1.0

    n_cols = M.shape[1]
    for iteration in range(1, max_iterations + 1):
        cycle_max = 0.0
        for dim in dims:
            codes = fe_codes[dim]
            levels = fe_levels[dim]
            means = np.empty((levels, n_cols), dtype=np.float64)
            for j in range(n_cols):
                means[:, j] = np.bincount(codes, weights=M[:, j], minlength=levels)
            means /= counts[dim][:, None]
            adjust = means[codes]
            M -= adjust
            change = float(np.max(np.abs(adjust))) if adjust.size else 0.0
            cycle_max = max(cycle_max, change)
        if cycle_max < tol:
            return M, iteration
    raise NoConvergence(
        f"demeaning did not converge in {max_iterations} cycles "
        f"(last max change {cycle_max:.3e})",
        iterations=max_iterations,
        last_change=cycle_max,
    )


def ols(
    Xd: np.ndarray, yd: np.ndarray, columns: list[str]
) -> tuple[np.ndarray, np.ndarray, list[int], list[str]]:
    """Least squares on demeaned data, dropping absorbed/collinear columns.

    Returns (beta over kept columns, residuals, kept column indices, dropped
    column names)."""
    n = Xd.shape[0]
    variances = np.einsum("ij,ij->j", Xd, Xd) / max(n, 1)
    keep = [j for j in range(Xd.shape[1]) if variances[j] >= ABSORB_VAR_TOL]
    dropped = [columns[j] for j in range(Xd.shape[1]) if j not in keep]
    Xk = Xd[:, keep]
    if Xk.shape[1] == 0:
        raise RankDeficient("all regressors absorbed by fixed effects")
    beta, _, rank, _ = np.linalg.lstsq(Xk, yd, rcond=None)
    if rank < Xk.shape[1]:
        raise RankDeficient(
            f"demeaned design rank {rank} < {Xk.shape[1]} retained columns"
        )
    residuals = yd - Xk @ beta
    return beta, residuals, keep, dropped


def absorbed_parameter_count(fe_levels: dict[str, int]) -> int:
    """Dof convention: sum over absorbed dimensions of (levels - 1), with no
    connected-component correction."""
    return sum(levels - 1 for levels in fe_levels.values())


def cluster_vcov(
    Xk: np.ndarray,
    residuals: np.ndarray,
    cluster_codes: np.ndarray,
    n_clusters: int,
    k_total: int,
) -> np.ndarray:
    """CR1 sandwich: (X'X)^-1 (sum_g X_g'e_g e_g'X_g) (X'X)^-1 scaled by
    [G/(G-1)] [(N-1)/(N-K)]."""
    n, k = Xk.shape
    if n_clusters < 2:
        raise TooFewClusters(f"need >= 2 clusters, got {n_clusters}")
    if n_clusters < 10:
        import logging

        logging.getLogger(__name__).warning(
            "only %d clusters: CR1 inference may be unreliable", n_clusters
        )
    gram = Xk.T @ Xk
    bread = np.linalg.inv(gram)
    scores = Xk * residuals[:, None]
    cluster_scores = np.zeros((n_clusters, k), dtype=np.float64)
    np.add.at(cluster_scores, cluster_codes, scores)
    meat = cluster_scores.T @ cluster_scores
    G, N = n_clusters, n
    dof_scale = (G / (G - 1)) * ((N - 1) / max(N - k_total, 1))
    vcov = dof_scale * bread @ meat @ bread
    # symmetrize away accumulation asymmetry
    return (vcov + vcov.T) / 2.0


def fit_event_study(
    frame: pd.DataFrame,
    reference_year: int = 2022,
    fe_spec: Optional[FixedEffectSpec] = None,
    critical: str = "normal",
) -> FitResult:
    """Full pipeline: build design -> demean -> OLS -> clustered covariance.

    Interaction coefficients genai_x_<year> measure the GenAI/non-GenAI
    similarity gap in that year relative to the reference year.
    """
    fe_spec = fe_spec or FixedEffectSpec()
    design = build_design(frame, reference_year, fe_spec.dimensions)

    stacked = np.column_stack([design.y, design.X])
    demeaned, iterations = demean(
        stacked,
        design.fe_codes,
        design.fe_levels,
        tol=fe_spec.tol,
        max_iterations=fe_spec.max_iterations,
    )
    yd = demeaned[:, 0]
    Xd = demeaned[:, 1:]

    beta, residuals, keep, dropped = ols(Xd, yd, design.columns)
    kept_names = [design.columns[j] for j in keep]
    k_absorbed = absorbed_parameter_count(design.fe_levels)
    k_total = len(keep) + k_absorbed
    vcov = cluster_vcov(
        Xd[:, keep], residuals, design.cluster_codes, design.n_clusters, k_total
    )
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))

    if critical == "normal":
        crit = float(stats.norm.ppf(0.975))
        pvals = 2.0 * stats.norm.sf(np.abs(np.divide(beta, se, where=se > 0)))
    elif critical == "t":
        df = design.n_clusters - 1
        crit = float(stats.t.ppf(0.975, df))
        pvals = 2.0 * stats.t.sf(np.abs(np.divide(beta, se, where=se > 0)), df)
    else:
        raise ValueError(f"unknown critical value convention {critical!r}")
    pvals = np.where(se > 0, pvals, np.nan)

    params = pd.DataFrame(
        {
            "term": kept_names,
            "estimate": beta,
            "se": se,
            "t": np.divide(beta, se, out=np.full_like(beta, np.nan), where=se > 0),
            "p": pvals,
            "ci_low": beta - crit * se,
            "ci_high": beta + crit * se,
        }
    )
    return FitResult(
        params=params,
        vcov=vcov,
        residuals=residuals,
        n_obs=design.n_obs,
        n_clusters=design.n_clusters,
        iterations=iterations,
        dof_convention="explicit + sum(levels-1) per absorbed dimension",
        k_model=len(keep),
        k_absorbed=k_absorbed,
        dropped_columns=dropped,
        critical_value=crit,
    )
