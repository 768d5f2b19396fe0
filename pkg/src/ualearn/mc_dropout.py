"""Monte-Carlo-dropout inference: stochastic forward passes, averaged
probabilities, predictive entropy, and entropy thresholds.

Keeping dropout active at inference time and averaging the class
probabilities of repeated passes approximates Bayesian predictive inference.
The uncertainty measure is the entropy (base 2, in bits) of the *averaged*
distribution, not the average of the per-pass entropies: the most likely
label is read off the mean distribution, and the same distribution is what
the entropy threshold judges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Network, class_probabilities
from .rng import as_generator

#: MC sample counts commonly reported side by side.
DEFAULT_MC_SETTINGS = (5, 20, 50)
DEFAULT_MC_SAMPLES = 20


def predictive_entropy(p) -> float:
    """Entropy of a probability vector in bits, with ``0 * log 0 := 0``.

    ``p`` must be non-negative and sum to 1 within 1e-6. The result lies in
    ``[0, log2(len(p))]``.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("expected a 1-D probability vector")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities must sum to 1 (got {total})")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class UncertaintyThreshold:
    """An entropy cutoff expressed as a fraction of the maximum entropy."""

    value_bits: float
    class_count: int
    fraction_of_max: float

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if not 0.0 < self.fraction_of_max <= 1.0:
            raise ValueError("fraction_of_max must lie in (0, 1]")
        expected = self.fraction_of_max * np.log2(self.class_count)
        if abs(self.value_bits - expected) > 1e-6:
            raise ValueError(
                f"value_bits {self.value_bits} is not {self.fraction_of_max} "
                f"of the {self.class_count}-class maximum entropy"
            )


def threshold_from_fraction(class_count: int, fraction: float) -> UncertaintyThreshold:
    """Threshold at ``fraction`` of the maximum entropy ``log2(class_count)``."""
    if class_count < 2:
        raise ValueError("class_count must be >= 2")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    return UncertaintyThreshold(
        value_bits=float(fraction * np.log2(class_count)),
        class_count=class_count,
        fraction_of_max=fraction,
    )


@dataclass
class PredictiveDistribution:
    """Per-pass class probabilities plus their mean, entropy, and argmax label."""

    per_sample_probs: np.ndarray  # (mc_samples, class_count)
    mean_probs: np.ndarray        # (class_count,)
    entropy_bits: float
    predicted_label: int

    @classmethod
    def from_samples(cls, per_sample_probs: np.ndarray) -> "PredictiveDistribution":
        per = np.asarray(per_sample_probs, dtype=np.float64)
        if per.ndim != 2 or per.shape[0] < 1:
            raise ValueError("per_sample_probs must be a non-empty 2-D array")
        if np.any(per < 0):
            raise ValueError("probabilities must be non-negative")
        sums = per.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("every probability row must sum to 1 within 1e-9")
        mean = per.mean(axis=0)
        return cls(
            per_sample_probs=per,
            mean_probs=mean,
            entropy_bits=predictive_entropy(mean),
            predicted_label=int(np.argmax(mean)),
        )


def mc_predict(net: Network, x, mc_samples: int, rng=None) -> PredictiveDistribution:
    """Run ``mc_samples`` dropout-active forward passes on one sample.

    Each pass draws a fresh mask from its own sub-stream (spawned from
    ``rng``), so the result does not depend on the order the passes run in
    and is bit-reproducible for a fixed seed. A single-unit sigmoid head is
    expanded to the two-class vector ``[1 - p, p]`` before averaging.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    streams = as_generator(rng).spawn(mc_samples)
    rows = [class_probabilities(net, x, dropout_active=True, rng=s)[0] for s in streams]
    return PredictiveDistribution.from_samples(np.vstack(rows))
