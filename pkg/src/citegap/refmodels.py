"""Draw-based reference models for citation networks.

Each model redraws every observed citation from an eligible set and
yields, in closed form, the probability that paper i cites paper j and
the expected in-citations per paper:

* random draws (RD): uniform over everything the citer could cite,
  preserving only each paper's out-citation count;
* homophilic draws (HD): uniform within the observed target's attribute
  category, additionally preserving attribute-pair citation counts;
* preferential draws (PD): HD further restricted, in publication-date
  order, to papers whose running expected in-citation count equals the
  observed target's, approximately preserving in-citation heterogeneity.

Probabilities are piecewise-uniform, so expectations are stored as
:class:`ContributionGroup` lists instead of dense N x N matrices: one
group per citer (RD) or per merged citation bundle (HD/PD), each
carrying the observed targets it represents.  Downstream sums (gender
expectations, PageRank operators, pairwise matrices) all reduce over
groups.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .corpus import (
    ATTRIBUTE_ORDER,
    CitationNetwork,
    GenderCategory,
    canonical_attributes,
    category_key,
)

MODELS = ("RD", "HD", "PD")

#: default tolerance when comparing running expected counts in PD
DEFAULT_COUNT_TOL = 1e-9


class ModelError(ValueError):
    """A reference model cannot be computed on this network."""


@dataclass(frozen=True)
class ContributionGroup:
    """Uniform probability mass from one citer into one member set.

    ``weight`` is the expected number of citations each member receives
    from this group; ``weight * len(members)`` equals ``len(targets)``,
    the number of observed citations the group represents.  Citations
    from the same citer with identical member sets are merged.
    """

    citing: int
    members: np.ndarray
    targets: tuple[int, ...]
    weight: float

    def __post_init__(self) -> None:
        members = np.asarray(self.members, dtype=np.int64)
        members.setflags(write=False)
        object.__setattr__(self, "members", members)


@dataclass(frozen=True, eq=False)
class ExpectedCitations:
    """A reference model's output on one network."""

    model: str
    attributes: tuple[str, ...]
    groups: tuple[ContributionGroup, ...]
    c_bar: np.ndarray
    n_papers: int
    n_citations: int

    def __post_init__(self) -> None:
        c_bar = np.asarray(self.c_bar, dtype=np.float64)
        c_bar.setflags(write=False)
        object.__setattr__(self, "c_bar", c_bar)

    @cached_property
    def groups_by_citing(self) -> dict[int, tuple[ContributionGroup, ...]]:
        buckets: dict[int, list[ContributionGroup]] = {}
        for g in self.groups:
            buckets.setdefault(g.citing, []).append(g)
        return {i: tuple(gs) for i, gs in buckets.items()}

    def check_network(self, net: CitationNetwork) -> None:
        if self.n_papers != net.n or self.n_citations != net.m:
            raise ModelError(
                f"expectations were computed on a {self.n_papers}-paper/"
                f"{self.n_citations}-citation network, got {net.n}/{net.m}"
            )


class _EligibilityIndex:
    """Vectorized date-window / author-exclusion masks per citer."""

    def __init__(self, net: CitationNetwork):
        self.net = net
        self.dates = net.dates
        self.floors = net.window_floors
        self.firsts, self.lasts = net.author_codes

    def mask(self, i: int) -> np.ndarray:
        """Boolean mask over papers eligible to be cited by paper i.

        Eligible: published between ten calendar years before paper i and
        paper i's own date (no citing the future), not paper i itself,
        and not sharing both first and last author slots with paper i.
        """
        m = (self.dates >= self.floors[i]) & (self.dates <= self.dates[i])
        fi, li = self.firsts[i], self.lasts[i]
        overlap_first = (self.firsts == fi) | (self.firsts == li)
        overlap_last = (self.lasts == fi) | (self.lasts == li)
        m &= ~(overlap_first & overlap_last)
        m[i] = False
        return m


def _key_codes(net: CitationNetwork, attributes: tuple[str, ...]) -> np.ndarray:
    """Integer code per paper for its category key under ``attributes``.

    An empty attribute set gives every paper the same code, so HD
    degenerates toward RD grouping.
    """
    codes = np.empty(net.n, dtype=np.int64)
    seen: dict[tuple, int] = {}
    for i, p in enumerate(net.papers):
        key = category_key(p, attributes)
        codes[i] = seen.setdefault(key, len(seen))
    return codes


def eligible_set_rd(net: CitationNetwork, i: int) -> np.ndarray:
    """Sorted indices of papers that paper i could cite under RD."""
    return np.flatnonzero(_EligibilityIndex(net).mask(i))


def eligible_set_hd(
    net: CitationNetwork,
    i: int,
    i_prime: int,
    attributes: Iterable[str] = ATTRIBUTE_ORDER,
) -> np.ndarray:
    """Sorted indices of the RD-eligible papers sharing the observed
    target's category, always including the target itself."""
    attrs = canonical_attributes(attributes)
    codes = _key_codes(net, attrs)
    members = np.flatnonzero(
        _EligibilityIndex(net).mask(i) & (codes == codes[i_prime])
    )
    return _with_member(members, i_prime)


def _with_member(members: np.ndarray, j: int) -> np.ndarray:
    """Sorted member array guaranteed to contain j."""
    pos = np.searchsorted(members, j)
    if pos < len(members) and members[pos] == j:
        return members
    return np.insert(members, pos, j)


def random_draws(net: CitationNetwork) -> ExpectedCitations:
    """Expected citations when every citation is redrawn uniformly from
    the citer's eligible set.  One group per citing paper; raises
    :class:`ModelError` for a citer with an empty eligible set."""
    index = _EligibilityIndex(net)
    groups: list[ContributionGroup] = []
    c_bar = np.zeros(net.n)
    for i in range(net.n):
        targets = net.out_targets[i]
        if targets.size == 0:
            continue
        members = np.flatnonzero(index.mask(i))
        if members.size == 0:
            raise ModelError(
                f"paper {net.papers[i].id!r} makes {targets.size} citation(s) "
                "but its eligible set is empty"
            )
        weight = targets.size / members.size
        groups.append(
            ContributionGroup(i, members, tuple(int(t) for t in targets), weight)
        )
        c_bar[members] += weight
    return ExpectedCitations("RD", (), tuple(groups), c_bar, net.n, net.m)


def homophilic_draws(
    net: CitationNetwork, attributes: Iterable[str] = ATTRIBUTE_ORDER
) -> ExpectedCitations:
    """Expected citations when each observed citation is redrawn
    uniformly within the target's category inside the eligible set.

    Citations from the same paper into the same member set merge into a
    single group with summed multiplicity.
    """
    attrs = canonical_attributes(attributes)
    index = _EligibilityIndex(net)
    codes = _key_codes(net, attrs)
    groups: list[ContributionGroup] = []
    c_bar = np.zeros(net.n)
    for i in range(net.n):
        targets = net.out_targets[i]
        if targets.size == 0:
            continue
        mask = index.mask(i)
        base_cache: dict[int, np.ndarray] = {}
        merged: dict[bytes, tuple[np.ndarray, list[int]]] = {}
        for t in targets:
            t = int(t)
            code = codes[t]
            base = base_cache.get(code)
            if base is None:
                base = np.flatnonzero(mask & (codes == code))
                base_cache[code] = base
            members = _with_member(base, t)
            entry = merged.setdefault(members.tobytes(), (members, []))
            entry[1].append(t)
        for members, tlist in merged.values():
            weight = len(tlist) / members.size
            groups.append(ContributionGroup(i, members, tuple(tlist), weight))
            c_bar[members] += weight
    return ExpectedCitations("HD", attrs, tuple(groups), c_bar, net.n, net.m)


def date_order(net: CitationNetwork) -> list[int]:
    """Paper indices by ascending publication date, ties broken by id."""
    return sorted(range(net.n), key=lambda i: (net.papers[i].pub_date, net.papers[i].id))


def preferential_draws(
    net: CitationNetwork,
    attributes: Iterable[str] = ATTRIBUTE_ORDER,
    *,
    count_tol: float = DEFAULT_COUNT_TOL,
    exact: bool = False,
) -> ExpectedCitations:
    """Expected citations under the sequential preferential-draws model.

    Papers are processed in ascending publication-date order (ties by
    id).  For each observed citation the HD member set is restricted to
    papers whose running expected in-citation count equals the observed
    target's; all citations of one paper read the state frozen before
    that paper, then their contributions are applied together.

    Count equality is ``|a - b| <= count_tol`` in float mode.  With
    ``exact=True`` the running counts are exact rationals compared for
    true equality, which removes float drift at the cost of speed.
    """
    attrs = canonical_attributes(attributes)
    index = _EligibilityIndex(net)
    codes = _key_codes(net, attrs)
    groups: list[ContributionGroup] = []
    running: list[Fraction] | np.ndarray
    if exact:
        running = [Fraction(0)] * net.n
    else:
        running = np.zeros(net.n)

    for x in date_order(net):
        targets = net.out_targets[x]
        if targets.size == 0:
            continue
        mask = index.mask(x)
        base_cache: dict[int, np.ndarray] = {}
        merged: dict[bytes, tuple[np.ndarray, list[int]]] = {}
        for t in targets:
            t = int(t)
            code = codes[t]
            base = base_cache.get(code)
            if base is None:
                base = np.flatnonzero(mask & (codes == code))
                base_cache[code] = base
            if exact:
                ct = running[t]
                members = np.asarray(
                    [int(m) for m in base if running[int(m)] == ct], dtype=np.int64
                )
            else:
                members = base[np.abs(running[base] - running[t]) <= count_tol]
            members = _with_member(members, t)
            entry = merged.setdefault(members.tobytes(), (members, []))
            entry[1].append(t)
        # freeze: apply this paper's mass only after all its citations
        for members, tlist in merged.values():
            if exact:
                frac = Fraction(len(tlist), members.size)
                for m in members:
                    running[int(m)] += frac
                weight = float(frac)
            else:
                weight = len(tlist) / members.size
                running[members] += weight
            groups.append(ContributionGroup(x, members, tuple(tlist), weight))

    if exact:
        c_bar = np.array([float(v) for v in running])
    else:
        c_bar = running.copy()
    groups.sort(key=lambda g: g.citing)
    return ExpectedCitations("PD", attrs, tuple(groups), c_bar, net.n, net.m)


def compute_model(
    net: CitationNetwork,
    model: str,
    attributes: Iterable[str] = ATTRIBUTE_ORDER,
    *,
    count_tol: float = DEFAULT_COUNT_TOL,
    exact: bool = False,
) -> ExpectedCitations:
    """Dispatch on the model name (``RD``, ``HD``, or ``PD``)."""
    name = model.upper()
    if name == "RD":
        return random_draws(net)
    if name == "HD":
        return homophilic_draws(net, attributes)
    if name == "PD":
        return preferential_draws(net, attributes, count_tol=count_tol, exact=exact)
    raise ValueError(f"unknown model {model!r}")


def observed_as_expectations(net: CitationNetwork) -> ExpectedCitations:
    """Degenerate expectations putting unit mass on each observed edge.

    Useful as a consistency anchor: reference-model machinery applied to
    these groups must reproduce observed statistics exactly.
    """
    groups = [
        ContributionGroup(i, np.array([t]), (int(t),), 1.0)
        for i in range(net.n)
        for t in net.out_targets[i]
    ]
    return ExpectedCitations(
        "observed", (), tuple(groups), net.in_degree.astype(float), net.n, net.m
    )


def citation_probability(ec: ExpectedCitations, i: int, j: int) -> float:
    """Probability mass the model puts on a citation from i to j."""
    total = 0.0
    for g in ec.groups_by_citing.get(i, ()):
        pos = np.searchsorted(g.members, j)
        if pos < len(g.members) and g.members[pos] == j:
            total += g.weight
    return total


def expected_out(ec: ExpectedCitations) -> np.ndarray:
    """Per-paper total probability mass placed on outgoing citations."""
    out = np.zeros(ec.n_papers)
    for g in ec.groups:
        out[g.citing] += g.weight * g.members.size
    return out


# ---------------------------------------------------------------------------
# structural comparison of a model against the observed network


@dataclass(frozen=True)
class SurvivalCurve:
    """P(value >= x) evaluated at each distinct threshold x."""

    thresholds: np.ndarray
    fraction: np.ndarray


@dataclass(frozen=True)
class PairwiseCounts:
    """Citation counts between categories of one attribute."""

    attribute: str
    labels: tuple[str, ...]
    observed: np.ndarray
    expected: np.ndarray


@dataclass(frozen=True)
class StructuralReport:
    """Which structural properties the model preserved."""

    model: str
    out_degree_hist: dict[int, int]
    pairwise: dict[str, PairwiseCounts]
    survival_observed: SurvivalCurve
    survival_expected: SurvivalCurve
    survival_by_gender: dict[str, tuple[SurvivalCurve, SurvivalCurve]]
    ks_in_degree: float


def survival_points(values: Sequence[float] | np.ndarray) -> SurvivalCurve:
    """Empirical survival function of ``values`` (always includes x=0)."""
    vals = np.sort(np.asarray(values, dtype=np.float64))
    thresholds = np.unique(np.concatenate(([0.0], vals)))
    fraction = (len(vals) - np.searchsorted(vals, thresholds, side="left")) / len(vals)
    return SurvivalCurve(thresholds, fraction)


def ks_distance(observed: np.ndarray, expected: np.ndarray) -> float:
    """Two-sample KS statistic between two per-paper value vectors."""
    return float(stats.ks_2samp(observed, expected).statistic)


def structural_report(net: CitationNetwork, ec: ExpectedCitations) -> StructuralReport:
    """Observed-vs-expected bundle: out-degree histogram, per-attribute
    pairwise citation matrices, and in-citation survival functions
    (overall and per gender category)."""
    ec.check_network(net)
    degrees, counts = np.unique(net.out_degree, return_counts=True)
    hist = {int(d): int(c) for d, c in zip(degrees, counts)}

    pairwise: dict[str, PairwiseCounts] = {}
    for attribute in ATTRIBUTE_ORDER:
        codes, labels = net.attribute_codes(attribute)
        size = len(labels)
        observed = np.zeros((size, size))
        np.add.at(observed, (codes[net.edges[:, 0]], codes[net.edges[:, 1]]), 1.0)
        expected = np.zeros((size, size))
        for g in ec.groups:
            expected[codes[g.citing]] += g.weight * np.bincount(
                codes[g.members], minlength=size
            )
        pairwise[attribute] = PairwiseCounts(attribute, labels, observed, expected)

    c_obs = net.in_degree.astype(float)
    by_gender: dict[str, tuple[SurvivalCurve, SurvivalCurve]] = {}
    for category in GenderCategory:
        sel = net.gender_codes == list(GenderCategory).index(category)
        if not sel.any():
            continue
        by_gender[category.value] = (
            survival_points(c_obs[sel]),
            survival_points(ec.c_bar[sel]),
        )
    return StructuralReport(
        model=ec.model,
        out_degree_hist=hist,
        pairwise=pairwise,
        survival_observed=survival_points(c_obs),
        survival_expected=survival_points(ec.c_bar),
        survival_by_gender=by_gender,
        ks_in_degree=ks_distance(c_obs, ec.c_bar),
    )
