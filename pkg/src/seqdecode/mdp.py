"""Deterministic token-level decoding MDP.

States are (source, output prefix) pairs over an integer vocabulary.
Appending a token is the only action; a state is terminal once the prefix
ends with the EOS token or hits the hard length cap. Reward exists only at
terminal states and is delegated to a metric.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .scoring import Metric

Sequence = tuple[int, ...]


class ContractViolation(RuntimeError):
    """An operation was called outside its stated preconditions."""


class ConfigurationError(ValueError):
    """Incompatible configuration, e.g. a reference-based metric without a reference."""


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else float(x)


def validate_sequence(tokens: Sequence, eos_id: int) -> None:
    """A sequence may contain EOS at most once, and only as its final token."""
    for i, t in enumerate(tokens):
        if t < 0:
            raise ValueError(f"negative token id {t}")
        if t == eos_id and i != len(tokens) - 1:
            raise ValueError("EOS may only appear as the final token")


@dataclass(frozen=True)
class DecodeState:
    """One MDP state: a source sentence plus a partial output.

    ``max_len`` caps ``len(prefix)`` *including* the closing EOS token, so a
    model with content horizon ``h`` produces states with ``max_len = h + 1``.
    """

    source: Sequence
    prefix: Sequence
    max_len: int
    eos_id: int

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        if len(self.prefix) > self.max_len:
            raise ValueError("prefix longer than max_len")
        validate_sequence(self.source, self.eos_id)
        validate_sequence(self.prefix, self.eos_id)

    @property
    def terminal(self) -> bool:
        ends_with_eos = len(self.prefix) > 0 and self.prefix[-1] == self.eos_id
        return ends_with_eos or len(self.prefix) == self.max_len

    @property
    def content(self) -> Sequence:
        """The prefix without its closing EOS; this is what metrics score."""
        if self.prefix and self.prefix[-1] == self.eos_id:
            return self.prefix[:-1]
        return self.prefix


def step(state: DecodeState, action: int) -> DecodeState:
    """Append one token. Stepping a terminal state is a caller bug."""
    if state.terminal:
        raise ContractViolation("step() called on a terminal state")
    if action < 0:
        raise ValueError(f"invalid token id {action}")
    return replace(state, prefix=state.prefix + (action,))


def terminal_reward(
    state: DecodeState,
    metric: "Metric",
    reference: Sequence | None = None,
) -> float:
    """Score a finished output.

    Reference-based (privileged) metrics compare against ``reference``;
    source-only (unprivileged) metrics compare against ``state.source``.
    The closing EOS is excluded from the scored text, and the result is
    clamped to [0, 1].
    """
    if not state.terminal:
        raise ContractViolation("terminal_reward() called on a non-terminal state")
    if metric.privileged:
        if reference is None:
            raise ConfigurationError(f"metric {metric.name!r} requires a reference")
        anchor = tuple(reference)
    else:
        anchor = state.source
    return clamp01(metric(anchor, state.content))
