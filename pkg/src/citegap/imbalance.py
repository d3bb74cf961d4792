"""Observed vs expected citations per gender category.

Counts citations received by each gender category within a from/to
paper selection, compares them against a reference model's expectations,
and attaches percentile bootstrap confidence intervals obtained by
resampling citing papers with replacement.  Citations whose target has
an unknown gender category are tallied separately and excluded from
both the observed counts and the expectations.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .corpus import (
    KNOWN_CATEGORIES,
    RANK_ORDER,
    CitationNetwork,
    GenderCategory,
    Paper,
)
from .refmodels import ExpectedCitations

_FILTER_FIELDS = ("gender", "rank", "country", "topic", "subfield")

STRATIFIERS = ("conference_rank", "subfield")


@dataclass(frozen=True)
class PaperFilter:
    """Predicate over papers, parseable from ``field=value`` descriptors.

    ``"all"`` selects everything; ``"gender=WW,rank=A*"`` is a
    conjunction.  Valid fields: gender, rank, country, topic, subfield.
    """

    description: str
    criteria: tuple[tuple[str, str], ...]

    @classmethod
    def parse(cls, text: str) -> "PaperFilter":
        text = text.strip()
        if text in ("", "all"):
            return ALL_PAPERS
        criteria = []
        for part in text.split(","):
            name, sep, value = part.partition("=")
            name, value = name.strip(), value.strip()
            if not sep or name not in _FILTER_FIELDS:
                raise ValueError(f"bad filter clause {part!r}")
            criteria.append((name, value))
        return cls(text, tuple(criteria))

    def __call__(self, paper: Paper) -> bool:
        # gender/rank are str-enums, so they compare against raw tokens
        return all(getattr(paper, name) == value for name, value in self.criteria)


ALL_PAPERS = PaperFilter("all", ())

Predicate = Callable[[Paper], bool]


def _filter_mask(net: CitationNetwork, predicate: Predicate) -> np.ndarray:
    return np.fromiter((bool(predicate(p)) for p in net.papers), bool, net.n)


def _describe(predicate: Predicate) -> str:
    return predicate.description if isinstance(predicate, PaperFilter) else repr(predicate)


def observed_by_gender(
    net: CitationNetwork,
    from_filter: Predicate = ALL_PAPERS,
    to_filter: Predicate = ALL_PAPERS,
) -> dict[GenderCategory, int]:
    """Citations from the from-set into the to-set, counted by the
    target's gender category.  The UNKNOWN entry is the separate tally of
    citations whose target category is unknown."""
    fm = _filter_mask(net, from_filter)
    tm = _filter_mask(net, to_filter)
    keep = fm[net.edges[:, 0]] & tm[net.edges[:, 1]]
    counts = np.bincount(
        net.gender_codes[net.edges[keep, 1]], minlength=len(GenderCategory)
    )
    return {g: int(counts[k]) for k, g in enumerate(GenderCategory)}


def expected_by_gender(
    net: CitationNetwork,
    ec: ExpectedCitations,
    from_filter: Predicate = ALL_PAPERS,
    to_filter: Predicate = ALL_PAPERS,
) -> dict[GenderCategory, float]:
    """Reference-model expectation of the counts in
    :func:`observed_by_gender`.

    Every contribution group whose citer passes the from-filter adds
    (citations into the to-set) x (fraction of its members in each
    category).  Citations to UNKNOWN-gender targets are excluded; the
    UNKNOWN entry reports the mass falling on UNKNOWN-gender members for
    the same citations.
    """
    ec.check_network(net)
    fm = _filter_mask(net, from_filter)
    tm = _filter_mask(net, to_filter)
    gcodes = net.gender_codes
    known = gcodes != list(GenderCategory).index(GenderCategory.UNKNOWN)
    totals = np.zeros(len(GenderCategory))
    for g in ec.groups:
        if not fm[g.citing]:
            continue
        targets = np.asarray(g.targets)
        m_to = int(np.count_nonzero(tm[targets] & known[targets]))
        if m_to == 0:
            continue
        member_counts = np.bincount(gcodes[g.members], minlength=len(GenderCategory))
        totals += m_to * member_counts / g.members.size
    return {g: float(totals[k]) for k, g in enumerate(GenderCategory)}


def over_under(n_obs: float, n_expected: float) -> float | None:
    """Signed fraction (observed - expected) / expected, or None when the
    expectation is zero (undefined marker, never silently 0)."""
    if n_expected == 0:
        return None
    return (n_obs - n_expected) / n_expected


def _group_arrays(
    net: CitationNetwork,
    ec: ExpectedCitations,
    from_mask: np.ndarray,
    to_mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-group citer index, to-set citation count, and per-category
    member fractions, restricted to groups passing the from-filter."""
    gcodes = net.gender_codes
    known = gcodes != list(GenderCategory).index(GenderCategory.UNKNOWN)
    citing, m_to, fractions = [], [], []
    for g in ec.groups:
        if not from_mask[g.citing]:
            continue
        targets = np.asarray(g.targets)
        count = int(np.count_nonzero(to_mask[targets] & known[targets]))
        if count == 0:
            continue
        citing.append(g.citing)
        m_to.append(count)
        member_counts = np.bincount(gcodes[g.members], minlength=len(GenderCategory))
        fractions.append(member_counts[: len(KNOWN_CATEGORIES)] / g.members.size)
    if not citing:
        return (
            np.zeros(0, dtype=np.int64),
            np.zeros(0),
            np.zeros((len(KNOWN_CATEGORIES), 0)),
        )
    return (
        np.asarray(citing, dtype=np.int64),
        np.asarray(m_to, dtype=np.float64),
        np.asarray(fractions, dtype=np.float64).T,
    )


def bootstrap_ci(
    net: CitationNetwork,
    ec: ExpectedCitations,
    from_filter: Predicate = ALL_PAPERS,
    to_filter: Predicate = ALL_PAPERS,
    resamples: int = 500,
    seed: int = 0,
) -> dict[GenderCategory, tuple[float, float] | None]:
    """95% percentile bootstrap CI of over/under-citation per category.

    Each resample draws N papers with replacement; a paper drawn m times
    contributes its outgoing citations and its group fractions m times.
    Group member sets stay those of the full-network model.  Resamples
    with zero expected mass for a category are undefined and dropped;
    the CI itself is None when fewer than two defined resamples remain.
    """
    if resamples < 2:
        raise ValueError("resamples must be at least 2")
    ec.check_network(net)
    fm = _filter_mask(net, from_filter)
    tm = _filter_mask(net, to_filter)
    gcodes = net.gender_codes
    known = gcodes != list(GenderCategory).index(GenderCategory.UNKNOWN)

    # per-citer observed counts per category, restricted to from/to
    obs = np.zeros((len(KNOWN_CATEGORIES), net.n))
    keep = fm[net.edges[:, 0]] & tm[net.edges[:, 1]] & known[net.edges[:, 1]]
    np.add.at(obs, (gcodes[net.edges[keep, 1]], net.edges[keep, 0]), 1.0)

    citing, m_to, fractions = _group_arrays(net, ec, fm, tm)

    values = np.full((resamples, len(KNOWN_CATEGORIES)), np.nan)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(resamples)):
        rng = np.random.default_rng(child)
        mult = np.bincount(rng.integers(0, net.n, net.n), minlength=net.n)
        observed = obs @ mult
        expected = fractions @ (mult[citing] * m_to) if citing.size else np.zeros(
            len(KNOWN_CATEGORIES)
        )
        defined = expected > 0
        values[r, defined] = (observed[defined] - expected[defined]) / expected[defined]

    out: dict[GenderCategory, tuple[float, float] | None] = {}
    for k, g in enumerate(KNOWN_CATEGORIES):
        column = values[:, k]
        column = column[~np.isnan(column)]
        if column.size < 2:
            out[g] = None
        else:
            low, high = np.percentile(column, [2.5, 97.5])
            out[g] = (float(low), float(high))
    return out


@dataclass(frozen=True)
class ImbalanceReport:
    """Observed/expected citations and over/under-citation for one
    gender category under one model and from/to selection."""

    gender: GenderCategory
    n_obs: int
    n_expected: float
    over_under: float | None
    ci_low: float | None
    ci_high: float | None
    model: str
    from_filter: str
    to_filter: str
    stratum: str | None = None

    @property
    def status(self) -> str:
        return "ok" if self.over_under is not None else "undefined"


def imbalance_report(
    net: CitationNetwork,
    ec: ExpectedCitations,
    from_filter: Predicate = ALL_PAPERS,
    to_filter: Predicate = ALL_PAPERS,
    resamples: int = 500,
    seed: int = 0,
    stratum: str | None = None,
) -> list[ImbalanceReport]:
    """Full per-category report: counts, expectations, over/under, CI.

    ``resamples=0`` skips the bootstrap (CIs reported as None).
    """
    observed = observed_by_gender(net, from_filter, to_filter)
    expected = expected_by_gender(net, ec, from_filter, to_filter)
    cis: dict[GenderCategory, tuple[float, float] | None]
    if resamples:
        cis = bootstrap_ci(net, ec, from_filter, to_filter, resamples, seed)
    else:
        cis = {g: None for g in KNOWN_CATEGORIES}
    reports = []
    for g in KNOWN_CATEGORIES:
        ci = cis[g]
        reports.append(
            ImbalanceReport(
                gender=g,
                n_obs=observed[g],
                n_expected=expected[g],
                over_under=over_under(observed[g], expected[g]),
                ci_low=None if ci is None else ci[0],
                ci_high=None if ci is None else ci[1],
                model=ec.model,
                from_filter=_describe(from_filter),
                to_filter=_describe(to_filter),
                stratum=stratum,
            )
        )
    return reports


def stratified_imbalance(
    net: CitationNetwork,
    ec: ExpectedCitations,
    stratifier: str,
    resamples: int = 500,
    seed: int = 0,
) -> list[ImbalanceReport]:
    """Per-stratum reports with to = papers in the stratum, from = all.

    ``stratifier`` is ``conference_rank`` or ``subfield``; strata are the
    values present in the network (ranks in prestige order, subfields
    sorted).
    """
    if stratifier == "conference_rank":
        present = {p.rank for p in net.papers}
        strata = [("rank", r.value) for r in RANK_ORDER if r in present]
    elif stratifier == "subfield":
        strata = [("subfield", v) for v in sorted({p.subfield for p in net.papers})]
    else:
        raise ValueError(f"unknown stratifier {stratifier!r} (use {STRATIFIERS})")
    reports: list[ImbalanceReport] = []
    for name, value in strata:
        to_filter = PaperFilter.parse(f"{name}={value}")
        reports.extend(
            imbalance_report(
                net, ec, ALL_PAPERS, to_filter, resamples, seed, stratum=value
            )
        )
    return reports


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman rank correlation (average ranks on ties), or None when a
    constant input leaves it undefined."""
    if len(x) != len(y):
        raise ValueError("inputs must have equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(x, y).correlation
    if np.isnan(rho):
        return None
    return float(rho)


# ---------------------------------------------------------------------------
# export

_CSV_COLUMNS = (
    "model",
    "from",
    "to",
    "gender",
    "n_obs",
    "n_expected",
    "over_under",
    "ci_low",
    "ci_high",
    "status",
    "stratum",
)


def report_rows(reports: Iterable[ImbalanceReport]) -> list[dict[str, object]]:
    rows = []
    for r in reports:
        rows.append(
            {
                "model": r.model,
                "from": r.from_filter,
                "to": r.to_filter,
                "gender": r.gender.value,
                "n_obs": r.n_obs,
                "n_expected": r.n_expected,
                "over_under": r.over_under,
                "ci_low": r.ci_low,
                "ci_high": r.ci_high,
                "status": r.status,
                "stratum": r.stratum,
            }
        )
    return rows


def write_report_csv(reports: Iterable[ImbalanceReport], path: str | Path) -> None:
    """CSV export; undefined markers become empty fields plus status."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in report_rows(reports):
            writer.writerow(
                ["" if row[c] is None else _format(row[c]) for c in _CSV_COLUMNS]
            )


def write_report_json(reports: Iterable[ImbalanceReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_rows(reports), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _format(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
