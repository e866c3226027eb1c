from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from seqdecode import (
    ConfigurationError,
    ContractViolation,
    DecodeState,
    bleu_metric,
    step,
    terminal_reward,
)

from conftest import A, B, EOS


def state(prefix=(), source=(A, B), max_len=4):
    return DecodeState(source=source, prefix=tuple(prefix), max_len=max_len, eos_id=EOS)


class TestStep:
    def test_appends_token(self):
        s = step(state(()), A)
        assert s.prefix == (A,)
        assert not s.terminal
        assert s.source == (A, B)

    def test_length_cap_terminates(self):
        s = step(state((A, A), max_len=3), A)
        assert s.prefix == (A, A, A)
        assert s.terminal

    def test_eos_terminates(self):
        s = step(state((A,)), EOS)
        assert s.prefix == (A, EOS)
        assert s.terminal

    def test_terminal_state_rejected(self):
        with pytest.raises(ContractViolation):
            step(state((A, EOS)), A)

    def test_pure(self):
        s = state((A,))
        assert step(s, B) == step(s, B)
        assert s.prefix == (A,)  # input untouched


class TestDecodeStateInvariants:
    def test_interior_eos_rejected(self):
        with pytest.raises(ValueError):
            state((EOS, A))

    def test_overlong_prefix_rejected(self):
        with pytest.raises(ValueError):
            state((A, A, A), max_len=2)

    def test_content_strips_final_eos(self):
        assert state((A, B, EOS)).content == (A, B)
        assert state((A, B)).content == (A, B)
        assert state((EOS,)).content == ()

    @given(st.lists(st.sampled_from([A, B]), max_size=6), st.integers(1, 7))
    def test_every_trajectory_terminates_within_cap(self, actions, max_len):
        s = state((), max_len=max_len)
        for a in actions + [A] * max_len:
            if s.terminal:
                break
            s = step(s, a)
        assert s.terminal
        assert len(s.prefix) <= max_len


class TestTerminalReward:
    def test_occupancy_full(self, occupancy_a3):
        s = state((A, A, A, EOS), max_len=4)
        assert terminal_reward(s, occupancy_a3) == 1.0

    def test_bleu_identical_sentences(self):
        ref = (A, B, A, B)
        s = state(ref + (EOS,), max_len=5)
        assert terminal_reward(s, bleu_metric(max_n=2), reference=ref) == 1.0

    def test_empty_output_scores_zero(self, occupancy_a3):
        assert terminal_reward(state((EOS,)), occupancy_a3) == 0.0

    def test_partial_occupancy(self, occupancy_a3):
        assert terminal_reward(state((B, A, EOS)), occupancy_a3) == pytest.approx(1 / 3)

    def test_non_terminal_rejected(self, occupancy_a3):
        with pytest.raises(ContractViolation):
            terminal_reward(state((A,)), occupancy_a3)

    def test_privileged_without_reference_rejected(self):
        with pytest.raises(ConfigurationError):
            terminal_reward(state((A, EOS)), bleu_metric())
