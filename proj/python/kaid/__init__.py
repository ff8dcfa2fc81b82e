"""Knowledge acquisition, adapter infusion and distillation pipeline."""

from ._kaid import (
    Config,
    Matcher,
    RuntimeFailure,
    ValidationError,
    auc,
    build_kg,
    distill_loss,
    f1_score,
    mine_phrases,
    run_stage,
    stage_names,
    synthetic_domain,
    tokenize,
)

__all__ = [
    "Config",
    "Matcher",
    "RuntimeFailure",
    "ValidationError",
    "auc",
    "build_kg",
    "distill_loss",
    "f1_score",
    "mine_phrases",
    "run_pipeline",
    "run_stage",
    "stage_names",
    "synthetic_domain",
    "tokenize",
]


def run_pipeline(config, stages=None):
    """Runs the given stages (all of them by default) in order; returns their summaries."""
    return [run_stage(s, config) for s in (stages or stage_names())]
