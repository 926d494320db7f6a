"""Kraskov-style k-nearest-neighbor mutual information between two
sample ensembles, plus the state-space reduction report derived from it."""

import math
from dataclasses import dataclass

import numpy as np

from .knn import ksg_counts
from .numerics import digamma, uniform_sample

LN2 = math.log(2.0)


@dataclass(frozen=True)
class MIEstimate:
    """MI in nats and bits (bits = nats / ln 2), with the k and n used."""

    nats: float
    bits: float
    k: int
    n: int


def ksg_mi(x, y, k=3, backend=None):
    """kNN mutual information estimate between ensembles x and y.

    Both are (n x d) matrices, one sample per row, matched row-for-row.
    Estimate: psi(k) + psi(n) - mean_i[psi(nx_i + 1) + psi(ny_i + 1)] with
    the joint radius and strict marginal counts from ksg_counts. The
    per-point terms are summed in sorted order, so the result is bit-stable
    under identical row permutations of both ensembles and under swapping
    x with y. Estimates may come out slightly negative; they are never
    clamped.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("ensembles must be finite")
    _, nx, ny = ksg_counts(x, y, k, backend=backend)
    n = x.shape[0]
    per_point = digamma(nx + 1.0) + digamma(ny + 1.0)
    mean_correction = float(np.sort(per_point).sum()) / n
    nats = digamma(float(k)) + digamma(float(n)) - mean_correction
    return MIEstimate(nats=nats, bits=nats / LN2, k=int(k), n=int(n))


def jitter(ensemble, rng, amplitude=1e-10):
    """Add i.i.d. Uniform[-amplitude, amplitude) noise entrywise.

    Breaks exact duplicates before neighbor counting; amplitude 0 returns
    the values unchanged. Deterministic per rng state.
    """
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    ensemble = np.asarray(ensemble, dtype=np.float64)
    return ensemble + uniform_sample(rng, -amplitude, amplitude, ensemble.shape)


@dataclass(frozen=True)
class ReductionReport:
    """Effective state-space shrinkage implied by inter-layer MI.

    Kept in log space: log2_factor = n_layers * mi_bits, so enormous
    reductions never overflow.
    """

    mi_bits: float
    n_layers: int
    log2_factor: float

    @property
    def factor(self):
        try:
            return 2.0 ** self.log2_factor
        except OverflowError:
            return math.inf


def reduction_report(mi_bits, n_layers):
    """ReductionReport for a measured MI (in bits) across n_layers layers."""
    n_layers = int(n_layers)
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    return ReductionReport(float(mi_bits), n_layers, float(n_layers) * float(mi_bits))
