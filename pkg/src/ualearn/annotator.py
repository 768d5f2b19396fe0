"""The trained Bayesian model as an automatic labeling oracle.

For each sample the annotator runs MC-dropout inference, reads the label off
the averaged distribution, and compares the predictive entropy ``u`` against
a threshold ``T``: it is confident exactly when ``u < T`` (strictly), and
abstains otherwise. Optionally it cross-verifies its label against ground
truth, accepting only samples it labels both confidently and correctly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .mc_dropout import DEFAULT_MC_SAMPLES, UncertaintyThreshold, mc_predict
from .nn import Network
from .rng import as_generator


@dataclass
class Annotation:
    """The annotator's verdict on one sample."""

    label: int
    uncertainty_bits: float
    confident: bool
    mean_probs: np.ndarray


@dataclass
class AnnotationResult:
    """One row of a batch annotation: position in the batch, verdict, gate."""

    index: int
    annotation: Annotation
    accepted: bool
    reason: str  # "accepted", "uncertain", or "label_mismatch"


@dataclass
class Annotator:
    model: Network
    threshold: UncertaintyThreshold
    mc_samples: int = DEFAULT_MC_SAMPLES
    verify_against_ground_truth: bool = False

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")


def annotate(annotator: Annotator, x, rng=None) -> Annotation:
    """Label one sample and judge the label's uncertainty against the threshold."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.shape[0] != annotator.model.input_width:
        raise ShapeError(
            f"sample has {x.shape[0]} features but the model expects "
            f"{annotator.model.input_width}"
        )
    dist = mc_predict(annotator.model, x, annotator.mc_samples, rng)
    return Annotation(
        label=dist.predicted_label,
        uncertainty_bits=dist.entropy_bits,
        confident=dist.entropy_bits < annotator.threshold.value_bits,
        mean_probs=dist.mean_probs,
    )


def annotate_batch(annotator: Annotator, X, ground_truth=None, rng=None):
    """Annotate every row of ``X``; nothing is silently dropped.

    A sample is accepted when the annotator is confident and, in verify
    mode, its label matches ``ground_truth``. Each sample gets its own
    spawned rng stream, so results are independent of evaluation order.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("X must be a 2-D batch")
    if annotator.verify_against_ground_truth and ground_truth is None:
        raise ValueError("verification requested but no ground truth provided")
    if ground_truth is not None:
        ground_truth = np.asarray(ground_truth, dtype=np.int64)
        if ground_truth.shape[0] != X.shape[0]:
            raise ShapeError("ground_truth must have one label per row of X")
    streams = as_generator(rng).spawn(X.shape[0]) if X.shape[0] else []
    results = []
    for i, stream in enumerate(streams):
        ann = annotate(annotator, X[i], stream)
        if not ann.confident:
            accepted, reason = False, "uncertain"
        elif annotator.verify_against_ground_truth and ann.label != ground_truth[i]:
            accepted, reason = False, "label_mismatch"
        else:
            accepted, reason = True, "accepted"
        results.append(AnnotationResult(index=i, annotation=ann, accepted=accepted, reason=reason))
    return results


@dataclass
class UQReport:
    """Counts of the 2x2 grid {correct, wrong} x {u < T, u >= T}."""

    mc_samples: int
    correct_lt_t: int
    correct_ge_t: int
    wrong_lt_t: int
    wrong_ge_t: int

    @property
    def total(self) -> int:
        return self.correct_lt_t + self.correct_ge_t + self.wrong_lt_t + self.wrong_ge_t


def uq_report(annotator: Annotator, X, y, mc_settings=None, rng=None):
    """Tally the correctness-vs-uncertainty grid for each MC sample count.

    For every setting each sample is classified from scratch with that many
    MC passes; the four cells always sum to the number of samples.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D batch")
    if y.shape[0] != X.shape[0]:
        raise ShapeError("y must have one label per row of X")
    if mc_settings is None:
        mc_settings = (5, 20, 50)
    mc_settings = [int(s) for s in mc_settings]
    if any(s < 1 for s in mc_settings):
        raise ValueError("every MC setting must be >= 1")
    setting_streams = as_generator(rng).spawn(len(mc_settings))
    reports = []
    for samples, setting_stream in zip(mc_settings, setting_streams):
        cells = {"correct_lt_t": 0, "correct_ge_t": 0, "wrong_lt_t": 0, "wrong_ge_t": 0}
        for i, stream in enumerate(setting_stream.spawn(X.shape[0])):
            dist = mc_predict(annotator.model, X[i], samples, stream)
            correct = dist.predicted_label == y[i]
            confident = dist.entropy_bits < annotator.threshold.value_bits
            key = ("correct" if correct else "wrong") + ("_lt_t" if confident else "_ge_t")
            cells[key] += 1
        reports.append(UQReport(mc_samples=samples, **cells))
    return reports


def uq_report_to_csv(reports, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("mc_samples,correct_lt_T,correct_ge_T,wrong_lt_T,wrong_ge_T\n")
        for rep in reports:
            fh.write(
                f"{rep.mc_samples},{rep.correct_lt_t},{rep.correct_ge_t},"
                f"{rep.wrong_lt_t},{rep.wrong_ge_t}\n"
            )
