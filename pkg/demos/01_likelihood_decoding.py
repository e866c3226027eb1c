"""Likelihood-based decoding and the empty-output trap.

The fixture model emits tokens {0, 1} and EOS = 2 with a fixed prior
[0.5, 0.3, 0.2] for up to three content tokens. Even though its argmax token
is 0, the single most likely *complete* sequence is the empty one: stopping
immediately costs 0.2, while every three-token continuation costs at most
0.5^3 = 0.125. Plain beam search therefore returns the empty output, and the
(6/(t+5))^theta length normalization is what rescues the content.
"""

import math

from seqdecode import BeamConfig, FixedPriorModel, beam_search, greedy_decode

PRIOR = (0.5, 0.3, 0.2)


def fresh_model():
    return FixedPriorModel(PRIOR, max_len=3)


def main() -> None:
    model = fresh_model()
    state = model.initial_state(())
    print(f"vocabulary size {model.vocab_size}, EOS id {model.eos_id}, prior {PRIOR}")

    greedy = greedy_decode(model, state)
    print(f"\ngreedy output          : {greedy.sequence}")
    print(f"greedy log-likelihood  : {greedy.log_likelihood:.4f} = 3 * ln 0.5")
    print(f"evaluations per token  : {model.ledger.per_token():.1f}")

    plain = beam_search(fresh_model(), state, BeamConfig(k=8, theta=0.0))
    print(f"\nbeam k=8, theta=0      : {plain.sequence}  (the empty sentence!)")
    print(f"its probability        : {math.exp(plain.log_likelihood):.3f}")
    print("The model's modal sequence is empty: P(EOS) = 0.2 beats every")
    print("full-length continuation, whose probability is at most 0.125.")

    print("\nlength-normalized beam scores, theta sweep:")
    for theta in (0.0, 0.5, 1.0):
        result = beam_search(fresh_model(), state, BeamConfig(k=8, theta=theta))
        print(f"  theta={theta:3.1f} -> {result.sequence}  normalized score {result.score:+.4f}")
    print("theta=1 makes the three-token output win: (6/9)*3*ln0.5 = -1.386")
    print("beats the empty output's ln 0.2 = -1.609.")


if __name__ == "__main__":
    main()
