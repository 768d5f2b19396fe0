"""Active-learning loops: pool-based sampling and query-by-committee.

Both loops grow a labeled set from an unlabeled pool. Each round scores the
pool, queries the top batch, asks the annotator for labels, keeps only the
labels the annotator accepts, retrains, and records a learning-curve point.
Queried samples leave the pool whether or not they were accepted (an
abstained sample would otherwise be re-queried forever), and every query
round consumes budget. The loop stops when the pool is empty or the query
budget ``max_queries`` is spent.

Accepted samples carry the annotator's predicted label, not ground truth;
ground truth enters only through the initial labeled seed, the held-out test
evaluation, and the annotator's optional verify mode. Test-set evaluation
always uses dropout-disabled deterministic forward passes.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .annotator import Annotator, annotate_batch
from .data import Split
from .nn import (
    CrossEntropyLoss,
    FocalLoss,
    LayerSpec,
    Network,
    TrainConfig,
    class_probabilities,
    predict_labels,
    predict_proba,
    train,
)
from .strategies import (
    entropy_scores,
    least_confident_scores,
    margin_scores,
    select_top_k,
    vote_entropy_scores,
)

ENGINE_STRATEGIES = ("least_confident", "margin", "entropy", "vote_entropy", "random")
LOSS_SCHEDULES = ("cross_entropy_only", "focal_only", "cross_entropy_then_focal")

_SCORERS = {
    "least_confident": least_confident_scores,
    "margin": margin_scores,
    "entropy": entropy_scores,
}


@dataclass
class ALConfig:
    """Knobs for one active-learning run.

    The defaults are the binary profile (batches of 10, budget 50); see
    :meth:`multiclass_profile` for the 16-per-round, 75-round variant.
    ``learner_mc_samples=None`` scores the pool with a single deterministic
    pass; an integer turns the learner Bayesian by averaging that many
    dropout-active passes.
    """

    strategy: str = "entropy"
    initial_labeled: int = 100
    query_batch: int = 10
    max_queries: int = 50
    committee_size: int = 3
    loss_schedule: str = "cross_entropy_only"
    retrain: TrainConfig = field(default_factory=TrainConfig)
    class_weights: np.ndarray | None = None
    focal_alpha: float = 4.0
    focal_gamma: float = 2.0
    learner_mc_samples: int | None = None
    warm_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ENGINE_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.loss_schedule not in LOSS_SCHEDULES:
            raise ValueError(f"unknown loss schedule {self.loss_schedule!r}")
        if self.initial_labeled < 1:
            raise ValueError("initial_labeled must be >= 1")
        if self.query_batch < 1:
            raise ValueError("query_batch must be >= 1")
        if self.max_queries < 1:
            raise ValueError("max_queries must be >= 1")
        if self.committee_size < 2:
            raise ValueError("committee_size must be >= 2")
        if self.learner_mc_samples is not None and self.learner_mc_samples < 1:
            raise ValueError("learner_mc_samples must be >= 1 or None")

    @classmethod
    def multiclass_profile(cls, **overrides) -> "ALConfig":
        """Batches of 16 and 75 rounds, totalling 1200 queried samples."""
        overrides.setdefault("query_batch", 16)
        overrides.setdefault("max_queries", 75)
        return cls(**overrides)


def loss_schedule_step(round_index: int, schedule: str, class_weights=None,
                       focal_alpha: float = 4.0, focal_gamma: float = 2.0):
    """Loss for a given round: round 0 is the initial training.

    ``cross_entropy_then_focal`` switches to focal loss for every retraining
    round after the initial cross-entropy phase; the other schedules are
    constant.
    """
    if schedule not in LOSS_SCHEDULES:
        raise ValueError(f"unknown loss schedule {schedule!r}")
    if schedule == "focal_only":
        return FocalLoss(alpha=focal_alpha, gamma=focal_gamma)
    if schedule == "cross_entropy_then_focal" and round_index >= 1:
        return FocalLoss(alpha=focal_alpha, gamma=focal_gamma)
    return CrossEntropyLoss(class_weights=class_weights)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    labeled_size: int
    accepted: int
    abstained: int
    test_accuracy: float
    strategy: str
    loss_kind: str


@dataclass
class ALState:
    """Evolving state of a loop: who is labeled, who is still in the pool."""

    labeled_indices: list
    labeled_labels: list
    pool_indices: list
    round_index: int
    history: list
    abstain_log: list  # (dataset index, reason) pairs


@dataclass
class Committee:
    members: list
    member_seeds: list

    def __post_init__(self):
        if not self.members:
            raise ValueError("a committee needs at least one member")
        first = self.members[0].layers
        for m in self.members[1:]:
            if m.layers != first:
                raise ValueError("committee members must share one architecture")


@dataclass
class PoolBasedResult:
    state: ALState
    model: Network


@dataclass
class QBCResult:
    state: ALState
    committee: Committee
    member_accuracies: list  # per round, one accuracy per member


def qbc_predict(committee: Committee, x):
    """Average the members' soft probabilities; ties go to the lowest label."""
    if not committee.members:
        raise ValueError("empty committee")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    mean = np.mean([predict_proba(m, x)[0] for m in committee.members], axis=0)
    return int(np.argmax(mean)), mean


def _test_accuracy(predict_fn, X, y, test_idx) -> float:
    if len(test_idx) == 0:
        return float("nan")
    return float(np.mean(predict_fn(X[test_idx]) == y[test_idx]))


def _pool_probabilities(model: Network, pool_X: np.ndarray, mc_samples, rng) -> np.ndarray:
    if mc_samples is None:
        return predict_proba(model, pool_X)
    total = np.zeros((pool_X.shape[0], model.class_count))
    for stream in rng.spawn(mc_samples):
        total += class_probabilities(model, pool_X, dropout_active=True, rng=stream)
    return total / mc_samples


def _check_disjoint(labeled, pool):
    overlap = set(labeled) & set(pool)
    if overlap:
        raise AssertionError(f"labeled and pool overlap: {sorted(overlap)[:5]}")


def _query_round(X, y, annotator, config, state, chosen_pool_positions, rng):
    """Annotate the chosen pool samples and move them out of the pool."""
    chosen = [state.pool_indices[p] for p in chosen_pool_positions]
    truth = y[chosen] if annotator.verify_against_ground_truth else None
    results = annotate_batch(annotator, X[chosen], ground_truth=truth, rng=rng)
    n_accepted = 0
    for res in results:
        global_index = chosen[res.index]
        if res.accepted:
            state.labeled_indices.append(global_index)
            state.labeled_labels.append(res.annotation.label)
            n_accepted += 1
        else:
            state.abstain_log.append((global_index, res.reason))
    chosen_set = set(chosen)
    state.pool_indices = [i for i in state.pool_indices if i not in chosen_set]
    return n_accepted, len(results) - n_accepted


def run_pool_based(X, y, split: Split, annotator: Annotator, config: ALConfig,
                   learner_layers) -> PoolBasedResult:
    """Pool-based sampling: one learner, scored by ``config.strategy``.

    The learner seeds on the first ``initial_labeled`` ground-truth samples
    of ``split.val_labeled`` and grows by annotator-labeled pool samples.
    History gets a round-0 record after the initial training, then one per
    query round.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if config.strategy == "vote_entropy":
        raise ValueError("vote_entropy scores a committee; use run_qbc")
    if len(split.val_labeled) < config.initial_labeled:
        raise ValueError(
            f"need {config.initial_labeled} initially labeled samples, "
            f"have {len(split.val_labeled)}"
        )
    rng = np.random.default_rng(config.seed)
    init_seed = int(rng.integers(2**63))
    learner = Network.init(learner_layers, seed=init_seed)

    seed_idx = split.val_labeled[: config.initial_labeled]
    state = ALState(
        labeled_indices=[int(i) for i in seed_idx],
        labeled_labels=[int(v) for v in y[seed_idx]],
        pool_indices=[int(i) for i in split.val_pool],
        round_index=0,
        history=[],
        abstain_log=[],
    )

    def retrain(model, round_index):
        loss = loss_schedule_step(
            round_index, config.loss_schedule, config.class_weights,
            config.focal_alpha, config.focal_gamma,
        )
        cfg = dataclasses.replace(config.retrain, seed=int(rng.integers(2**63)))
        if not config.warm_start and round_index > 0:
            model = Network.init(learner_layers, seed=init_seed)
        model, _ = train(
            model, X[state.labeled_indices], np.array(state.labeled_labels), cfg, loss
        )
        return model, loss.kind

    learner, loss_kind = retrain(learner, 0)
    state.history.append(RoundRecord(
        round_index=0, labeled_size=len(state.labeled_indices), accepted=0,
        abstained=0,
        test_accuracy=_test_accuracy(lambda B: predict_labels(learner, B), X, y, split.test),
        strategy=config.strategy, loss_kind=loss_kind,
    ))

    while state.pool_indices and state.round_index < config.max_queries:
        state.round_index += 1
        pool_X = X[state.pool_indices]
        if config.strategy == "random":
            chosen_pos = rng.permutation(len(state.pool_indices))[: config.query_batch]
        else:
            probs = _pool_probabilities(learner, pool_X, config.learner_mc_samples, rng)
            chosen_pos = select_top_k(_SCORERS[config.strategy](probs), config.query_batch)
        n_acc, n_abs = _query_round(
            X, y, annotator, config, state, chosen_pos, rng.spawn(1)[0]
        )
        _check_disjoint(state.labeled_indices, state.pool_indices)
        learner, loss_kind = retrain(learner, state.round_index)
        state.history.append(RoundRecord(
            round_index=state.round_index, labeled_size=len(state.labeled_indices),
            accepted=n_acc, abstained=n_abs,
            test_accuracy=_test_accuracy(lambda B: predict_labels(learner, B), X, y, split.test),
            strategy=config.strategy, loss_kind=loss_kind,
        ))
    return PoolBasedResult(state=state, model=learner)


def run_qbc(X, y, split: Split, annotator: Annotator, config: ALConfig,
            member_layers) -> QBCResult:
    """Query-by-committee: members on disjoint seeds, vote-entropy querying.

    Each member is initially trained on its own disjoint slice of
    ``initial_labeled`` ground-truth samples from ``split.val_labeled``.
    Every accepted sample is added to every member's training set, and all
    members retrain each round. Committee predictions average the members'
    probabilities.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if config.strategy != "vote_entropy":
        raise ValueError("run_qbc uses the vote_entropy strategy")
    members_n = config.committee_size
    need = members_n * config.initial_labeled
    if len(split.val_labeled) < need:
        raise ValueError(
            f"disjoint seeding needs {need} labeled samples "
            f"({members_n} members x {config.initial_labeled}), have {len(split.val_labeled)}"
        )
    rng = np.random.default_rng(config.seed)
    member_seeds = [int(rng.integers(2**63)) for _ in range(members_n)]
    members = [Network.init(member_layers, seed=s) for s in member_seeds]
    seed_slices = [
        [int(i) for i in split.val_labeled[m * config.initial_labeled : (m + 1) * config.initial_labeled]]
        for m in range(members_n)
    ]

    shared_idx: list = []      # accepted pool samples, added to every member
    shared_labels: list = []
    state = ALState(
        labeled_indices=[i for chunk in seed_slices for i in chunk],
        labeled_labels=[int(v) for chunk in seed_slices for v in y[chunk]],
        pool_indices=[int(i) for i in split.val_pool],
        round_index=0,
        history=[],
        abstain_log=[],
    )

    def retrain_all(round_index):
        loss = loss_schedule_step(
            round_index, config.loss_schedule, config.class_weights,
            config.focal_alpha, config.focal_gamma,
        )
        for m in range(members_n):
            cfg = dataclasses.replace(config.retrain, seed=int(rng.integers(2**63)))
            if not config.warm_start and round_index > 0:
                members[m] = Network.init(member_layers, seed=member_seeds[m])
            idx = seed_slices[m] + shared_idx
            labels = [int(v) for v in y[seed_slices[m]]] + shared_labels
            members[m], _ = train(members[m], X[idx], np.array(labels), cfg, loss)
        return loss.kind

    committee = Committee(members=members, member_seeds=member_seeds)
    member_accuracies: list = []

    def committee_labels(B):
        # Batched equivalent of qbc_predict on every row.
        mean = np.mean([predict_proba(m, B) for m in members], axis=0)
        return np.argmax(mean, axis=1)

    def record(round_index, n_acc, n_abs, loss_kind):
        committee_acc = _test_accuracy(committee_labels, X, y, split.test)
        member_accuracies.append([
            _test_accuracy(lambda B, m=m: predict_labels(m, B), X, y, split.test)
            for m in members
        ])
        state.history.append(RoundRecord(
            round_index=round_index, labeled_size=len(state.labeled_indices),
            accepted=n_acc, abstained=n_abs, test_accuracy=committee_acc,
            strategy=config.strategy, loss_kind=loss_kind,
        ))

    loss_kind = retrain_all(0)
    record(0, 0, 0, loss_kind)

    while state.pool_indices and state.round_index < config.max_queries:
        state.round_index += 1
        pool_X = X[state.pool_indices]
        if config.learner_mc_samples is None:
            votes = np.column_stack([predict_labels(m, pool_X) for m in members])
        else:
            votes = np.column_stack([
                np.argmax(_pool_probabilities(m, pool_X, config.learner_mc_samples, rng), axis=1)
                for m in members
            ])
        scores = vote_entropy_scores(votes, members[0].class_count)
        chosen_pos = select_top_k(scores, config.query_batch)
        before = len(state.labeled_indices)
        n_acc, n_abs = _query_round(
            X, y, annotator, config, state, chosen_pos, rng.spawn(1)[0]
        )
        shared_idx.extend(state.labeled_indices[before:])
        shared_labels.extend(state.labeled_labels[before:])
        _check_disjoint(state.labeled_indices, state.pool_indices)
        loss_kind = retrain_all(state.round_index)
        record(state.round_index, n_acc, n_abs, loss_kind)
    committee.members = members
    return QBCResult(state=state, committee=committee, member_accuracies=member_accuracies)


def history_to_csv(history, path) -> None:
    """Learning-curve CSV, one row per round."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("round,labeled_size,accepted,abstained,test_accuracy,strategy,loss_kind\n")
        for rec in history:
            fh.write(
                f"{rec.round_index},{rec.labeled_size},{rec.accepted},"
                f"{rec.abstained},{float(rec.test_accuracy)!r},{rec.strategy},{rec.loss_kind}\n"
            )
