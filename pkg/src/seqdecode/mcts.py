"""Batched Monte-Carlo tree search over flat arena arrays.

One search builds a tree per batch element for a single output position.
Storage is indexed by (batch, node) and (batch, node, sparse action): node i
is the i-th node expanded for that element, node 0 is the root, and only the
top-A prior actions of each node are kept, with ``topk_mapping`` translating
sparse slots back to vocabulary ids.

Selection uses the prior-weighted UCT rule with the node's own visit count
under the square root, and rescales exploitation values into [0, 1] via the
online min/max of all values seen in the tree. Unvisited children are
detected by a zero visit count and pinned to the rescaled minimum, which
keeps every decision invariant under affine maps of the value function.

:class:`RecursiveSearch` is a deliberately plain tree-of-records twin used
for differential testing of the arena arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import ContractViolation, DecodeState, Sequence, step
from .models import PolicyValueModel, apply_temperature, rollout_value
from .scoring import Metric

BACKUP_RULES = ("average", "max")
ROOT_SELECTIONS = ("visit_count", "max_value")
VALUE_SOURCES = ("model", "rollout")


@dataclass(frozen=True)
class SearchConfig:
    num_simulations: int = 16
    num_sparse_actions: int = 4
    c_puct: float = 1.0
    tau: float = 1.0  # prior temperature, applied once at node creation
    backup: str = "average"
    root_selection: str = "visit_count"
    value_source: str = "model"

    def __post_init__(self) -> None:
        if self.num_simulations < 0:
            raise ValueError("num_simulations must be >= 0")
        if self.num_sparse_actions < 1:
            raise ValueError("num_sparse_actions must be >= 1")
        if self.c_puct <= 0:
            raise ValueError("c_puct must be > 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.backup not in BACKUP_RULES:
            raise ValueError(f"backup must be one of {BACKUP_RULES}")
        if self.root_selection not in ROOT_SELECTIONS:
            raise ValueError(f"root_selection must be one of {ROOT_SELECTIONS}")
        if self.value_source not in VALUE_SOURCES:
            raise ValueError(f"value_source must be one of {VALUE_SOURCES}")


@dataclass
class SearchResult:
    """Root statistics of a finished search, scattered back to dense actions."""

    dense_visit_counts: np.ndarray  # (B, V) int
    dense_root_values: np.ndarray  # (B, V) float, valid where counts > 0
    root_priors: np.ndarray  # (B, V) raw (untempered) root priors
    tempered_root_priors: np.ndarray  # (B, V)


def _sparse_topk(prior_row: np.ndarray, num_sparse: int) -> np.ndarray:
    # Deterministic top-A: by descending prior, ties to the lower token id.
    return np.argsort(-prior_row, kind="stable")[:num_sparse]


class ArenaSearch:
    """Flat-array MCTS for a batch of root states (one tree per element)."""

    def __init__(
        self,
        model: PolicyValueModel,
        batch_size: int,
        cfg: SearchConfig,
        metric: Metric | None = None,
        references: list[Sequence | None] | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if cfg.num_sparse_actions > model.vocab_size:
            raise ValueError("num_sparse_actions must not exceed the vocabulary size")
        if cfg.value_source == "rollout" and metric is None:
            raise ValueError("rollout value source needs a metric")
        self.model = model
        self.cfg = cfg
        self.metric = metric
        self.references = references if references is not None else [None] * batch_size

        b, n, a = batch_size, cfg.num_simulations + 1, cfg.num_sparse_actions
        self.batch_size = b
        self.num_nodes = n
        self.num_actions = model.vocab_size
        self.num_sparse_actions = a

        self.visit_counts = np.zeros((b, n), dtype=np.int64)
        self.values = np.zeros((b, n), dtype=np.float64)
        self.raw_values = np.zeros((b, n), dtype=np.float64)
        self.parents = np.full((b, n), -1, dtype=np.int64)
        self.action_from_parents = np.full((b, n), -1, dtype=np.int64)
        self.depth = np.zeros((b, n), dtype=np.int64)
        self.is_terminal = np.zeros((b, n), dtype=bool)

        self.topk_mapping = np.full((b, n, a), -1, dtype=np.int64)
        self.children_index = np.full((b, n, a), -1, dtype=np.int64)
        self.children_prior = np.zeros((b, n, a), dtype=np.float64)
        self.children_values = np.zeros((b, n, a), dtype=np.float64)
        self.children_visits = np.zeros((b, n, a), dtype=np.int64)

        self.adaptive_min = np.zeros(b, dtype=np.float64)
        self.adaptive_max = np.zeros(b, dtype=np.float64)

        self.model_states: dict[tuple[int, int], object] = {}
        self.decode_states: dict[tuple[int, int], DecodeState] = {}
        self._batch_range = np.arange(b)
        self._sims_done = 0
        self._root_priors: np.ndarray | None = None
        self._tempered_root: np.ndarray | None = None

    # -------------------------------------------------------------- lifecycle

    def reset_tree(self) -> None:
        """Return every array to its freshly allocated contents."""
        self.visit_counts.fill(0)
        self.values.fill(0.0)
        self.raw_values.fill(0.0)
        self.parents.fill(-1)
        self.action_from_parents.fill(-1)
        self.depth.fill(0)
        self.is_terminal.fill(False)
        self.topk_mapping.fill(-1)
        self.children_index.fill(-1)
        self.children_prior.fill(0.0)
        self.children_values.fill(0.0)
        self.children_visits.fill(0)
        self.adaptive_min.fill(0.0)
        self.adaptive_max.fill(0.0)
        self.model_states = {}
        self.decode_states = {}
        self._sims_done = 0
        self._root_priors = None
        self._tempered_root = None

    def begin(self, root_states: list[DecodeState]) -> None:
        """Reset, evaluate the roots and install them as node 0."""
        if len(root_states) != self.batch_size:
            raise ValueError("batch size mismatch")
        for s in root_states:
            if s.terminal:
                raise ContractViolation("search roots must be non-terminal")
        self.reset_tree()

        priors, values, model_states = self.model.evaluate_root(root_states)
        if self.cfg.value_source == "rollout":
            values = self._rollout_values(root_states)
        self._root_priors = priors
        tempered = np.stack([apply_temperature(p, self.cfg.tau) for p in priors])
        self._tempered_root = tempered

        self.adaptive_min = values.astype(np.float64).copy()
        self.adaptive_max = values.astype(np.float64) + 1e-6

        terminal = np.zeros(self.batch_size, dtype=bool)
        self._create_node(0, tempered, values, model_states, terminal, root_states)

    def run(self, root_states: list[DecodeState]) -> SearchResult:
        """Full search: root evaluation plus ``num_simulations`` simulations."""
        self.begin(root_states)
        for _ in range(self.cfg.num_simulations):
            self.step_simulation()
        return self.result()

    def step_simulation(self) -> None:
        """One simulate / expand / backward round for every batch element."""
        if self._sims_done >= self.cfg.num_simulations:
            raise ContractViolation("simulation budget exhausted")
        node_indices, actions = self.simulate()
        next_node_index = self._sims_done + 1  # node 0 is the root
        self.expand(node_indices, actions, next_node_index)
        leaf_indices = np.full(self.batch_size, next_node_index, dtype=np.int64)
        self.backward(leaf_indices)
        self._sims_done += 1

    def result(self) -> SearchResult:
        dense_counts = np.zeros((self.batch_size, self.num_actions), dtype=np.int64)
        dense_values = np.zeros((self.batch_size, self.num_actions), dtype=np.float64)
        mapping = self.topk_mapping[:, 0, :]
        dense_counts[self._batch_range[:, None], mapping] = self.children_visits[:, 0, :]
        dense_values[self._batch_range[:, None], mapping] = self.children_values[:, 0, :]
        return SearchResult(
            dense_visit_counts=dense_counts,
            dense_root_values=dense_values,
            root_priors=self._root_priors.copy(),
            tempered_root_priors=self._tempered_root.copy(),
        )

    # -------------------------------------------------------------- internals

    def _rollout_values(self, states: list[DecodeState]) -> np.ndarray:
        return np.array(
            [
                rollout_value(self.model, s, self.metric, self.references[b])
                for b, s in enumerate(states)
            ]
        )

    def uct_select_action(self, node_indices: np.ndarray) -> np.ndarray:
        """Per element, the sparse action maximizing value score + policy score."""
        prior = self.children_prior[self._batch_range, node_indices, :]
        child_values = self.children_values[self._batch_range, node_indices, :]
        child_visits = self.children_visits[self._batch_range, node_indices, :]
        node_visits = self.visit_counts[self._batch_range, node_indices]

        policy_score = (
            np.sqrt(node_visits)[:, None] * self.cfg.c_puct * prior / (child_visits + 1)
        )
        span = (self.adaptive_max - self.adaptive_min)[:, None]
        # Unvisited children sit at the rescaled minimum; their stored value
        # (zero-filled) must never leak into the score.
        value_score = np.where(
            child_visits > 0,
            (child_values - self.adaptive_min[:, None]) / span,
            0.0,
        )
        return np.argmax(value_score + policy_score, axis=1)

    def simulate(self) -> tuple[np.ndarray, np.ndarray]:
        """Descend in lockstep until every element sits on an unexplored edge."""
        node_indices = np.zeros(self.batch_size, dtype=np.int64)
        while True:
            actions = self.uct_select_action(node_indices)
            next_nodes = self.children_index[self._batch_range, node_indices, actions]
            is_unexplored = next_nodes == -1
            if is_unexplored.all():
                return node_indices, actions
            node_indices = np.where(is_unexplored, node_indices, next_nodes)

    def expand(
        self, node_indices: np.ndarray, sparse_actions: np.ndarray, next_node_index: int
    ) -> None:
        """Evaluate the selected edges and wire the resulting nodes into the tree."""
        parent_model_states = [
            self.model_states[(b, int(node_indices[b]))] for b in range(self.batch_size)
        ]
        dense_actions = self.topk_mapping[self._batch_range, node_indices, sparse_actions]

        priors, values, next_model_states, terminal = self.model.evaluate_step(
            parent_model_states, [int(a) for a in dense_actions]
        )
        child_states = []
        for b in range(self.batch_size):
            parent_state = self.decode_states[(b, int(node_indices[b]))]
            if parent_state.terminal:
                child_states.append(parent_state)  # absorbing
            else:
                child_states.append(step(parent_state, int(dense_actions[b])))
        if self.cfg.value_source == "rollout":
            values = self._rollout_values(child_states)

        tempered = np.stack([apply_temperature(p, self.cfg.tau) for p in priors])
        self._create_node(next_node_index, tempered, values, next_model_states, terminal, child_states)

        self.adaptive_min = np.minimum(self.adaptive_min, values)
        self.adaptive_max = np.maximum(self.adaptive_max, values)

        self.children_index[self._batch_range, node_indices, sparse_actions] = next_node_index
        self.parents[:, next_node_index] = node_indices
        self.action_from_parents[:, next_node_index] = sparse_actions
        self.depth[:, next_node_index] = self.depth[self._batch_range, node_indices] + 1

    def _create_node(
        self,
        node_index: int,
        tempered_priors: np.ndarray,
        values: np.ndarray,
        model_states: list,
        terminal: np.ndarray,
        decode_states: list[DecodeState],
    ) -> None:
        for b in range(self.batch_size):
            top = _sparse_topk(tempered_priors[b], self.num_sparse_actions)
            self.topk_mapping[b, node_index, :] = top
            # Truncated priors are stored as-is, without renormalization.
            self.children_prior[b, node_index, :] = tempered_priors[b][top]
            self.model_states[(b, node_index)] = model_states[b]
            self.decode_states[(b, node_index)] = decode_states[b]
        self.values[:, node_index] = values
        self.raw_values[:, node_index] = values
        self.visit_counts[:, node_index] = 1
        self.is_terminal[:, node_index] = terminal

    def backward(self, leaf_indices: np.ndarray) -> None:
        """Propagate each leaf's value to its ancestors, masking finished walks."""
        node_indices = leaf_indices.astype(np.int64).copy()
        leaf_values = self.values[self._batch_range, leaf_indices]
        while True:
            is_root = node_indices == 0
            if is_root.all():
                return
            parents = np.where(is_root, 0, self.parents[self._batch_range, node_indices])
            keep = is_root  # keep: node already at root, do not touch its "parent"
            parent_values = self.values[self._batch_range, parents]
            parent_visits = self.visit_counts[self._batch_range, parents]
            if self.cfg.backup == "average":
                updated = (parent_values * parent_visits + leaf_values) / (parent_visits + 1)
            else:
                updated = np.maximum(parent_values, leaf_values)
            self.values[self._batch_range, parents] = np.where(keep, parent_values, updated)
            self.visit_counts[self._batch_range, parents] += ~keep

            actions = np.where(is_root, 0, self.action_from_parents[self._batch_range, node_indices])
            edge_values = self.children_values[self._batch_range, parents, actions]
            self.children_values[self._batch_range, parents, actions] = np.where(
                keep, edge_values, self.values[self._batch_range, node_indices]
            )
            self.children_visits[self._batch_range, parents, actions] += ~keep

            node_indices = parents

    # ------------------------------------------------------------- inspection

    def allocated_nodes(self) -> int:
        return self._sims_done + 1

    def node_token(self, b: int, node_index: int) -> int | None:
        """Vocabulary id of the edge into a node, or None for the root."""
        parent = int(self.parents[b, node_index])
        if parent < 0:
            return None
        sparse = int(self.action_from_parents[b, node_index])
        return int(self.topk_mapping[b, parent, sparse])


def select_root_action(
    dense_counts: np.ndarray,
    dense_values: np.ndarray,
    mode: str,
    fallback_priors: np.ndarray | None = None,
) -> np.ndarray:
    """Pick one vocabulary action per element from root statistics.

    ``visit_count`` takes the most visited child, ``max_value`` the visited
    child with the best aggregated value; ties go to the lower token id. With
    no visited child (a zero-simulation search) the argmax of the tempered
    root prior is used instead.
    """
    if mode not in ROOT_SELECTIONS:
        raise ValueError(f"unknown root selection {mode!r}")
    batch, _ = dense_counts.shape
    actions = np.zeros(batch, dtype=np.int64)
    for b in range(batch):
        visited = dense_counts[b] > 0
        if not visited.any():
            if fallback_priors is None:
                raise ValueError("no visited root child and no fallback prior")
            actions[b] = int(np.argmax(fallback_priors[b]))
        elif mode == "visit_count":
            actions[b] = int(np.argmax(dense_counts[b]))
        else:
            masked = np.where(visited, dense_values[b], -np.inf)
            actions[b] = int(np.argmax(masked))
    return actions


def decode_mcts(
    model: PolicyValueModel,
    states: list[DecodeState],
    cfg: SearchConfig,
    metric: Metric | None = None,
    references: list[Sequence | None] | None = None,
):
    """Decode a batch by running one search per output position.

    Finished elements are held fixed while the rest continue; each element is
    charged one root evaluation plus one evaluation per simulation for every
    emitted token (plus rollout costs in rollout mode).
    """
    from .decoders import Candidate  # local import to avoid a module cycle

    if not states:
        raise ValueError("empty batch")
    refs = references if references is not None else [None] * len(states)
    current = list(states)
    log_likelihoods = [0.0] * len(states)

    for _ in range(max(s.max_len for s in states) + 1):
        active = [i for i, s in enumerate(current) if not s.terminal]
        if not active:
            break
        arena = ArenaSearch(
            model,
            len(active),
            cfg,
            metric=metric,
            references=[refs[i] for i in active],
        )
        result = arena.run([current[i] for i in active])
        actions = select_root_action(
            result.dense_visit_counts,
            result.dense_root_values,
            cfg.root_selection,
            fallback_priors=result.tempered_root_priors,
        )
        for j, i in enumerate(active):
            a = int(actions[j])
            log_likelihoods[i] += math.log(result.root_priors[j][a])
            current[i] = step(current[i], a)
        model.ledger.charge_tokens(len(active))

    return [
        Candidate(sequence=s.prefix, log_likelihood=log_likelihoods[i], state=s)
        for i, s in enumerate(current)
    ]


# --------------------------------------------------------- reference twin


@dataclass
class _RefNode:
    index: int
    prior: np.ndarray  # tempered, truncated, unrenormalized
    mapping: np.ndarray  # sparse slot -> vocabulary id
    value: float
    raw_value: float
    visits: int
    terminal: bool
    decode_state: DecodeState
    model_state: object
    parent: "_RefNode | None" = None
    action_from_parent: int = -1
    depth: int = 0
    children: dict[int, "_RefNode"] = field(default_factory=dict)
    child_values: np.ndarray | None = None
    child_visits: np.ndarray | None = None


class RecursiveSearch:
    """Plain single-instance MCTS with explicit node records.

    Mirrors :class:`ArenaSearch` operation by operation (same selection
    formula, same backup arithmetic, same sparse-action ordering) so the two
    implementations must agree exactly after every simulation.
    """

    def __init__(
        self,
        model: PolicyValueModel,
        cfg: SearchConfig,
        metric: Metric | None = None,
        reference: Sequence | None = None,
    ):
        if cfg.num_sparse_actions > model.vocab_size:
            raise ValueError("num_sparse_actions must not exceed the vocabulary size")
        if cfg.value_source == "rollout" and metric is None:
            raise ValueError("rollout value source needs a metric")
        self.model = model
        self.cfg = cfg
        self.metric = metric
        self.reference = reference
        self.nodes: list[_RefNode] = []
        self.adaptive_min = 0.0
        self.adaptive_max = 0.0

    def begin(self, root_state: DecodeState) -> None:
        if root_state.terminal:
            raise ContractViolation("search roots must be non-terminal")
        self.nodes = []
        priors, values, model_states = self.model.evaluate_root([root_state])
        value = float(values[0])
        if self.cfg.value_source == "rollout":
            value = rollout_value(self.model, root_state, self.metric, self.reference)
        self.adaptive_min = value
        self.adaptive_max = value + 1e-6
        self._make_node(priors[0], value, model_states[0], False, root_state)

    def _make_node(
        self,
        prior: np.ndarray,
        value: float,
        model_state: object,
        terminal: bool,
        decode_state: DecodeState,
    ) -> _RefNode:
        tempered = apply_temperature(prior, self.cfg.tau)
        top = _sparse_topk(tempered, self.cfg.num_sparse_actions)
        node = _RefNode(
            index=len(self.nodes),
            prior=tempered[top],
            mapping=top,
            value=value,
            raw_value=value,
            visits=1,
            terminal=terminal,
            decode_state=decode_state,
            model_state=model_state,
            child_values=np.zeros(self.cfg.num_sparse_actions),
            child_visits=np.zeros(self.cfg.num_sparse_actions, dtype=np.int64),
        )
        self.nodes.append(node)
        return node

    def _select_action(self, node: _RefNode) -> int:
        policy_score = (
            math.sqrt(node.visits) * self.cfg.c_puct * node.prior / (node.child_visits + 1)
        )
        span = self.adaptive_max - self.adaptive_min
        value_score = np.where(
            node.child_visits > 0,
            (node.child_values - self.adaptive_min) / span,
            0.0,
        )
        return int(np.argmax(value_score + policy_score))

    def step_simulation(self) -> None:
        node = self.nodes[0]
        while True:
            action = self._select_action(node)
            child = node.children.get(action)
            if child is None:
                break
            node = child

        dense_action = int(node.mapping[action])
        priors, values, next_model_states, terminal = self.model.evaluate_step(
            [node.model_state], [dense_action]
        )
        if node.decode_state.terminal:
            child_state = node.decode_state
        else:
            child_state = step(node.decode_state, dense_action)
        value = float(values[0])
        if self.cfg.value_source == "rollout":
            value = rollout_value(self.model, child_state, self.metric, self.reference)

        leaf = self._make_node(priors[0], value, next_model_states[0], bool(terminal[0]), child_state)
        leaf.parent = node
        leaf.action_from_parent = action
        leaf.depth = node.depth + 1
        node.children[action] = leaf

        self.adaptive_min = min(self.adaptive_min, value)
        self.adaptive_max = max(self.adaptive_max, value)

        # Backward pass: push the leaf value to every ancestor.
        leaf_value = leaf.value
        child = leaf
        while child.parent is not None:
            parent = child.parent
            if self.cfg.backup == "average":
                parent.value = (parent.value * parent.visits + leaf_value) / (parent.visits + 1)
            else:
                parent.value = max(parent.value, leaf_value)
            parent.visits += 1
            parent.child_values[child.action_from_parent] = child.value
            parent.child_visits[child.action_from_parent] += 1
            child = parent

    def visit_counts(self) -> np.ndarray:
        return np.array([n.visits for n in self.nodes], dtype=np.int64)

    def node_values(self) -> np.ndarray:
        return np.array([n.value for n in self.nodes])
