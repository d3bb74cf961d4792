"""Citation-count and PageRank impact scores, and top-share curves.

Scores are computed for the observed network and for reference models
(using expected in-citations and the model's transition operator), then
normalized by the mean score of papers sharing publication year and
subfield.  The group-share curve reports, for a grid of d values, the
fraction of papers with a woman as first and/or last author among the
top d% of papers.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .corpus import CitationNetwork, W_CATEGORIES
from .refmodels import ExpectedCitations

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.85
DEFAULT_EPS = 1e-6
DEFAULT_T_MAX = 100

METRICS = ("citations", "pagerank")


@dataclass(frozen=True, eq=False)
class RankingResult:
    """Per-paper impact scores from one metric and one source."""

    metric: str
    source: str
    raw_score: np.ndarray
    normalized_score: np.ndarray
    alpha: float | None
    iterations_used: int
    converged: bool


def normalized_scores(raw: np.ndarray, net: CitationNetwork) -> np.ndarray:
    """Score divided by the mean score of papers published in the same
    year and subfield.  All-zero strata normalize to 0 with a warning."""
    raw = np.asarray(raw, dtype=np.float64)
    out = np.zeros(net.n)
    strata: dict[tuple[int, str], list[int]] = {}
    for i, p in enumerate(net.papers):
        strata.setdefault((p.year, p.subfield), []).append(i)
    for (year, subfield), indices in strata.items():
        idx = np.asarray(indices)
        mean = raw[idx].mean()
        if mean == 0:
            log.warning(
                "stratum (%s, %s) has zero mean score; normalized scores set to 0",
                year, subfield,
            )
            continue
        out[idx] = raw[idx] / mean
    return out


def _power_iteration(
    flow,
    teleport: np.ndarray,
    dangling: np.ndarray,
    alpha: float,
    eps: float,
    t_max: int,
) -> tuple[np.ndarray, int, bool]:
    """Iterate p <- alpha*(flow(p) + dangling_mass*teleport) + (1-alpha)*teleport
    from p(0) = teleport until the mean absolute update drops below eps."""
    p = teleport.copy()
    for t in range(1, t_max + 1):
        new = alpha * (flow(p) + p[dangling].sum() * teleport) + (1 - alpha) * teleport
        residual = np.abs(new - p).mean()
        p = new
        if residual < eps:
            return p, t, True
    return p, t_max, False


def pagerank_observed(
    net: CitationNetwork,
    alpha: float = DEFAULT_ALPHA,
    eps: float = DEFAULT_EPS,
    t_max: int = DEFAULT_T_MAX,
) -> RankingResult:
    """PageRank of the observed network.

    Random walk follows one of the citer's references uniformly with
    probability alpha and otherwise teleports to a paper drawn
    proportionally to its in-citations; papers making no citations
    always teleport.
    """
    if net.m == 0:
        raise ValueError("PageRank needs at least one citation (teleport "
                         "distribution is proportional to citations received)")
    teleport = net.in_degree / net.m
    k = net.out_degree
    citing, cited = net.edges[:, 0], net.edges[:, 1]
    transition = sparse.csr_matrix(
        (1.0 / k[citing], (cited, citing)), shape=(net.n, net.n)
    )
    p, used, converged = _power_iteration(
        transition.dot, teleport, k == 0, alpha, eps, t_max
    )
    return RankingResult("pagerank", "observed", p, normalized_scores(p, net),
                         alpha, used, converged)


def pagerank_reference(
    ec: ExpectedCitations,
    net: CitationNetwork,
    alpha: float = DEFAULT_ALPHA,
    eps: float = DEFAULT_EPS,
    t_max: int = DEFAULT_T_MAX,
) -> RankingResult:
    """PageRank under a reference model's transition probabilities.

    Citer rows move mass with probability (citation probability)/k_i;
    teleport and dangling rows are proportional to expected in-citations.
    The operator scatters through contribution groups, so the dense
    transition matrix is never materialized.
    """
    ec.check_network(net)
    if net.m == 0:
        raise ValueError("PageRank needs at least one citation")
    teleport = ec.c_bar / net.m
    k = net.out_degree

    group_citing = np.asarray([g.citing for g in ec.groups], dtype=np.int64)
    if len(ec.groups):
        sizes = np.asarray([g.members.size for g in ec.groups])
        rows = np.concatenate([g.members for g in ec.groups])
        cols = np.repeat(np.arange(len(ec.groups)), sizes)
        data = np.repeat(
            np.asarray([g.weight for g in ec.groups]) / k[group_citing], sizes
        )
        scatter = sparse.csr_matrix(
            (data, (rows, cols)), shape=(net.n, len(ec.groups))
        )
        flow = lambda p: scatter.dot(p[group_citing])
    else:
        flow = lambda p: np.zeros(net.n)

    p, used, converged = _power_iteration(
        flow, teleport, k == 0, alpha, eps, t_max
    )
    return RankingResult("pagerank", ec.model, p, normalized_scores(p, net),
                         alpha, used, converged)


def citation_scores(
    net: CitationNetwork, ec: ExpectedCitations | None = None
) -> RankingResult:
    """Citation counts (observed) or expected citation counts (model)."""
    if ec is None:
        raw = net.in_degree.astype(float)
        source = "observed"
    else:
        ec.check_network(net)
        raw = ec.c_bar.copy()
        source = ec.model
    return RankingResult("citations", source, raw, normalized_scores(raw, net),
                         None, 0, True)


def ranking_order(scores: np.ndarray, net: CitationNetwork) -> list[int]:
    """Paper indices by descending score; ties broken by paper id."""
    return sorted(range(net.n), key=lambda i: (-scores[i], net.papers[i].id))


def top_share(scores: np.ndarray, net: CitationNetwork, d: float) -> float:
    """Fraction of papers with a woman as first and/or last author among
    the ceil(d*N/100) papers with the highest scores."""
    if not 0 < d <= 100:
        raise ValueError("d must be in (0, 100]")
    take = math.ceil(d * net.n / 100)
    top = ranking_order(scores, net)[:take]
    hits = sum(1 for i in top if net.papers[i].gender in W_CATEGORIES)
    return hits / take


@dataclass(frozen=True)
class SharePoint:
    d: float
    source: str
    metric: str
    ww_share: float


def share_curve(
    net: CitationNetwork,
    metric: str,
    models: Mapping[str, ExpectedCitations],
    d_grid: Sequence[float],
    *,
    alpha: float = DEFAULT_ALPHA,
    eps: float = DEFAULT_EPS,
    t_max: int = DEFAULT_T_MAX,
) -> list[SharePoint]:
    """Top-share curve for the observed network plus each model, using
    normalized scores throughout."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    for d in d_grid:
        if not 0 < d <= 100:
            raise ValueError("d values must be in (0, 100]")

    results: list[RankingResult] = []
    if metric == "citations":
        results.append(citation_scores(net))
        results.extend(citation_scores(net, ec) for ec in models.values())
    else:
        results.append(pagerank_observed(net, alpha, eps, t_max))
        results.extend(
            pagerank_reference(ec, net, alpha, eps, t_max) for ec in models.values()
        )

    points = []
    for result in results:
        for d in d_grid:
            points.append(
                SharePoint(
                    float(d),
                    result.source,
                    metric,
                    top_share(result.normalized_score, net, d),
                )
            )
    return points


def write_ranking_csv(result: RankingResult, net: CitationNetwork, path: str | Path) -> None:
    """CSV export ``paper_id,raw,normalized,rank`` with ranks from the
    normalized scores (descending, id tiebreak)."""
    position = {i: r for r, i in enumerate(ranking_order(result.normalized_score, net), start=1)}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["paper_id", "raw", "normalized", "rank"])
        for i, p in enumerate(net.papers):
            writer.writerow(
                [p.id, repr(float(result.raw_score[i])),
                 repr(float(result.normalized_score[i])), position[i]]
            )


def write_share_csv(points: Iterable[SharePoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "source", "metric", "ww_share"])
        for pt in points:
            writer.writerow([repr(pt.d), pt.source, pt.metric, repr(pt.ww_share)])
