"""citegap: group imbalance in citation networks against draw-based
reference models.

Pipeline: parse and filter a corpus into a :class:`CitationNetwork`,
compute expected citations under the random-, homophilic-, or
preferential-draws model, then compare observed counts and rankings
against those expectations.
"""

__version__ = "0.1.0"

from .corpus import (
    ATTRIBUTE_ORDER,
    CitationNetwork,
    ConferenceRank,
    GenderCategory,
    IngestError,
    Paper,
    ParseError,
    PublicationRecord,
    category_key,
    filter_citations,
    gender_category,
    levenshtein,
    load_network,
    match_records,
)
from .imbalance import (
    ImbalanceReport,
    PaperFilter,
    bootstrap_ci,
    expected_by_gender,
    imbalance_report,
    observed_by_gender,
    over_under,
    spearman,
    stratified_imbalance,
)
from .ranking import (
    RankingResult,
    SharePoint,
    citation_scores,
    normalized_scores,
    pagerank_observed,
    pagerank_reference,
    share_curve,
    top_share,
)
from .refmodels import (
    ContributionGroup,
    ExpectedCitations,
    ModelError,
    citation_probability,
    compute_model,
    eligible_set_hd,
    eligible_set_rd,
    homophilic_draws,
    ks_distance,
    observed_as_expectations,
    preferential_draws,
    random_draws,
    structural_report,
)
from .synth import (
    GenerationError,
    OracleEstimate,
    SynthConfig,
    generate_network,
    monte_carlo_oracle,
)

__all__ = [
    "ATTRIBUTE_ORDER",
    "CitationNetwork",
    "ConferenceRank",
    "ContributionGroup",
    "ExpectedCitations",
    "GenderCategory",
    "GenerationError",
    "ImbalanceReport",
    "IngestError",
    "ModelError",
    "OracleEstimate",
    "Paper",
    "PaperFilter",
    "ParseError",
    "PublicationRecord",
    "RankingResult",
    "SharePoint",
    "SynthConfig",
    "bootstrap_ci",
    "category_key",
    "citation_probability",
    "citation_scores",
    "compute_model",
    "eligible_set_hd",
    "eligible_set_rd",
    "expected_by_gender",
    "filter_citations",
    "gender_category",
    "generate_network",
    "homophilic_draws",
    "imbalance_report",
    "ks_distance",
    "levenshtein",
    "load_network",
    "match_records",
    "monte_carlo_oracle",
    "normalized_scores",
    "observed_as_expectations",
    "observed_by_gender",
    "over_under",
    "pagerank_observed",
    "pagerank_reference",
    "preferential_draws",
    "random_draws",
    "share_curve",
    "spearman",
    "stratified_imbalance",
    "structural_report",
    "top_share",
]
