"""Evaluation harness: verdict scoring, ablation runs, statistics, and the
synthetic corpus generator with pinned frequency distributions."""

from .ablation import AblationResult, ReportFormat, emit_report, run_ablation
from .corpus import DEFAULT_PROFILE, CorpusBundle, DistributionProfile, generate_corpus
from .scoring import Color, GroundTruth, Rounds, ScoredVerdict, score_solution
from .stats import StatsSummary, compute_stats

__all__ = [
    "AblationResult",
    "Color",
    "CorpusBundle",
    "DEFAULT_PROFILE",
    "DistributionProfile",
    "GroundTruth",
    "ReportFormat",
    "Rounds",
    "ScoredVerdict",
    "StatsSummary",
    "compute_stats",
    "emit_report",
    "generate_corpus",
    "run_ablation",
    "score_solution",
]
