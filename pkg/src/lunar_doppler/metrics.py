"""Empirical histogram PDFs and goodness-of-fit metrics (WMRD, KL divergence)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import GmmParams, gmm_pdf

KL_EPS = 1e-12
DEFAULT_BINS = 100


@dataclass(frozen=True)
class HistogramPdf:
    bin_edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def masses(self) -> np.ndarray:
        """Per-bin probability mass (counts / M)."""
        return self.counts / self.counts.sum()


def histogram_pdf(data, bins: int = DEFAULT_BINS) -> HistogramPdf:
    """Uniform bins over [min, max]; the top edge is inclusive.

    Bin indices come from ``floor((x - lo) / (hi - lo) * bins)`` so that a
    histogram with 2*bins bins aggregates exactly onto this one.
    """
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot build a histogram from empty data")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise ValueError("all samples are equal: histogram range has zero width")
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    edges = lo + (hi - lo) * (np.arange(bins + 1) / bins)
    edges[-1] = hi
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        densities = counts / (x.size * np.diff(edges))
    if not np.all(np.isfinite(densities)):
        raise ValueError(f"sample range {hi - lo!r} is too narrow for {bins} bins")
    return HistogramPdf(edges, densities, counts)


def discretize_model(params: GmmParams, hist: HistogramPdf) -> np.ndarray:
    """Midpoint-rule mass of the mixture in each bin, renormalised over the support."""
    mass = gmm_pdf(params, hist.midpoints) * hist.widths
    total = mass.sum()
    if not total > 0:
        raise ValueError("model places no mass on the histogram support")
    return mass / total


def _check_pair(p_hat, p) -> tuple[np.ndarray, np.ndarray]:
    p_hat = np.asarray(p_hat, dtype=float)
    p = np.asarray(p, dtype=float)
    if p_hat.shape != p.shape:
        raise ValueError(f"length mismatch: {p_hat.shape} vs {p.shape}")
    if np.any(p_hat < 0) or np.any(p < 0):
        raise ValueError("masses must be non-negative")
    return p_hat, p


def wmrd(p_hat, p) -> float:
    """Weighted mean relative difference, sum|p_hat - p| / (sum(p_hat + p) / 2)."""
    p_hat, p = _check_pair(p_hat, p)
    denom = 0.5 * np.sum(p_hat + p)
    if not denom > 0:
        raise ValueError("WMRD is undefined for all-zero inputs")
    return float(np.sum(np.abs(p_hat - p)) / denom)


def kl_divergence(p_hat, p, eps: float = KL_EPS) -> float:
    """D(p_hat || p) in nats; empty ground-truth bins are floored at ``eps``."""
    p_hat, p = _check_pair(p_hat, p)
    support = p_hat > 0
    q = p_hat[support]
    return float(np.sum(q * np.log(q / np.maximum(p[support], eps))))


def evaluate_fit(data, params: GmmParams, bins: int = DEFAULT_BINS) -> tuple[float, float]:
    """(WMRD, KL) of a fitted mixture against the histogram of ``data``."""
    hist = histogram_pdf(data, bins)
    model = discretize_model(params, hist)
    return wmrd(model, hist.masses), kl_divergence(model, hist.masses)
