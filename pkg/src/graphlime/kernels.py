"""Gaussian Gram matrices, centering/normalization, and the dependence score.

A Gram matrix here is always over the nodes of one local sample. Feature
columns are kernelized one at a time; model outputs are kernelized as
vectors. Centering projects out the mean component and Frobenius
normalization puts every non-constant Gram on the unit sphere, which makes
the trace inner product of two such matrices a normalized dependence score
in [~0, 1] with self-score exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_finite

DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class Gram:
    """A symmetric kernel matrix, optionally centered and normalized.

    ``degenerate`` marks the all-zero matrix produced by a constant input;
    degenerate matrices score 0 against everything.
    """

    values: np.ndarray
    normalized: bool = False
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KernelConfig:
    """Widths for the input/output Gaussian kernels plus the masking switch.

    Widths may be positive floats or ``"auto"`` (median pairwise distance,
    falling back to 1.0 when the median is zero). Masking restricts every
    Gram to the sample's internal edges (plus self-loops) before centering;
    it is off by default, which treats the sample as a complete graph.
    """

    sigma_x: float | str = "auto"
    sigma_y: float | str = "auto"
    use_adjacency_mask: bool = False

    def __post_init__(self):
        for name, value in (("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)):
            if isinstance(value, str):
                if value != "auto":
                    raise ValueError(f"{name} must be a positive float or 'auto'")
            elif not value > 0:
                raise ValueError(f"{name} must be strictly positive")


def median_width(points) -> float:
    """Median pairwise Euclidean distance; 1.0 when the median is zero."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    sq = _pairwise_sq_dists(pts)
    iu = np.triu_indices(pts.shape[0], k=1)
    med = float(np.median(np.sqrt(sq[iu])))
    return med if med > DEGENERATE_EPS else 1.0


def standardize_column(column) -> tuple[np.ndarray, bool]:
    """Zero-mean unit-variance rescaling; flags constant columns instead."""
    col = np.asarray(column, dtype=float)
    std = float(col.std())
    if std < DEGENERATE_EPS:
        return np.zeros_like(col), True
    return (col - col.mean()) / std, False


def _pairwise_sq_dists(rows: np.ndarray) -> np.ndarray:
    sq = np.sum(rows * rows, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def gaussian_gram_feature(column, sigma_x: float) -> Gram:
    """Gaussian kernel matrix of a single feature column.

    Entries are exp(-(x_i - x_j)^2 / (2 sigma_x^2)); the diagonal is 1.
    """
    col = check_finite(column, "feature column").reshape(-1)
    if col.size < 2:
        raise ValueError("need at least 2 sample points")
    if not sigma_x > 0:
        raise ValueError("sigma_x must be strictly positive")
    diff = col[:, None] - col[None, :]
    return Gram(np.exp(-(diff * diff) / (2.0 * sigma_x * sigma_x)))


def gaussian_gram_output(predictions, sigma_y: float) -> Gram:
    """Gaussian kernel matrix of the model output vectors.

    Entries are exp(-||y_i - y_j||^2 / (2 sigma_y^2)).
    """
    rows = np.asarray(predictions, dtype=float)
    if rows.ndim != 2:
        raise ValueError(f"predictions must be 2-D with equal-length rows, got shape {rows.shape}")
    check_finite(rows, "predictions")
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 sample points")
    if not sigma_y > 0:
        raise ValueError("sigma_y must be strictly positive")
    d2 = _pairwise_sq_dists(rows)
    return Gram(np.exp(-d2 / (2.0 * sigma_y * sigma_y)))


def center_and_normalize(gram: Gram) -> Gram:
    """Center a Gram matrix on both sides and scale it to unit Frobenius norm.

    Constant inputs center to (numerically) zero; those come back as the
    all-zero matrix with the ``degenerate`` flag set rather than an error.
    """
    if gram.normalized:
        raise ValueError("gram is already centered and normalized")
    g = gram.values
    row_mean = g.mean(axis=0, keepdims=True)
    col_mean = g.mean(axis=1, keepdims=True)
    centered = g - row_mean - col_mean + g.mean()
    norm = float(np.linalg.norm(centered))
    if norm < DEGENERATE_EPS:
        return Gram(np.zeros_like(g), normalized=True, degenerate=True)
    centered = centered / norm
    centered = (centered + centered.T) / 2.0  # keep exact symmetry under fp
    return Gram(centered, normalized=True)


def nhsic(a: Gram, b: Gram) -> float:
    """Normalized dependence score trace(a @ b) of two normalized Grams.

    Equals 1 for any non-degenerate matrix against itself and 0 whenever
    either argument is degenerate.
    """
    if not (a.normalized and b.normalized):
        raise ValueError("nhsic requires centered, normalized Gram matrices")
    if a.values.shape != b.values.shape:
        raise ValueError(
            f"dimension mismatch: {a.values.shape} vs {b.values.shape}"
        )
    if a.degenerate or b.degenerate:
        return 0.0
    # trace(A @ B) == sum(A * B) for symmetric matrices
    return float(np.sum(a.values * b.values))


def mask_with_adjacency(gram: Gram, sample, graph) -> Gram:
    """Zero Gram entries between sample nodes that are not linked in the graph.

    The diagonal survives (self-loops). Apply before centering.
    """
    if gram.normalized:
        raise ValueError("mask before centering and normalization")
    mask = graph.adjacency_submatrix(sample.node_ids)
    return Gram(gram.values * mask)
