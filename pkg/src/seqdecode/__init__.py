"""Decoding strategies for autoregressive token models.

The package frames decoding as search over a deterministic token MDP and
provides likelihood-based decoders (greedy, beam), value-guided decoders
(value-guided beam search, batched MCTS), score-based reranking, exact
desk-scale oracles, and an experiment harness with inference-budget
accounting.
"""

from .decoders import (
    BeamConfig,
    Candidate,
    VgbsConfig,
    beam_search,
    greedy_decode,
    length_normalizer,
    rerank_by_score,
    rerank_by_value,
    sample_sequences,
    value_guided_beam_search,
)
from .harness import (
    AlgorithmSpec,
    CellResult,
    Instance,
    MetricSpec,
    ModelSpec,
    Report,
    RunConfig,
    emit_report,
    export_tree,
    format_table,
    load_dataset,
    load_report,
    run_experiment,
    save_dataset,
    stable_cell_seed,
    vgbs_width_for_budget,
)
from .mcts import (
    ArenaSearch,
    RecursiveSearch,
    SearchConfig,
    SearchResult,
    decode_mcts,
    select_root_action,
)
from .mdp import (
    ConfigurationError,
    ContractViolation,
    DecodeState,
    Sequence,
    step,
    terminal_reward,
)
from .models import (
    BudgetLedger,
    FixedPriorModel,
    ModelState,
    NoisyValueModel,
    PolicyValueModel,
    PolicyValueOutput,
    SeededTabularModel,
    TransformedValueModel,
    affine_value_model,
    apply_temperature,
    make_seeded_model,
    model_value_fn,
    rollout_value,
    rollout_value_fn,
)
from .oracle import (
    GuardExceeded,
    enumerate_sequences,
    exact_argmax_likelihood,
    exact_argmax_metric,
)
from .scoring import (
    Metric,
    SeededUnitEmbeddings,
    TableEmbeddings,
    bert_style_metric,
    bert_style_score,
    bleu,
    bleu_metric,
    coverage_metric,
    multilingual_bert_style_metric,
    occupancy_metric,
    toy_coverage,
    toy_occupancy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
