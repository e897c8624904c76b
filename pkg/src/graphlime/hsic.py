"""Sparse nonnegative regression of the output Gram onto per-feature Grams.

The problem

    min_{beta >= 0}  1/2 || Lbar - sum_k beta_k Kbar_k ||_F^2 + rho ||beta||_1

is solved by flattening each n x n Gram into an n^2-vector, which turns it
into an ordinary nonnegative lasso whose design Gram matrix is exactly the
d x d table of pairwise feature dependence scores and whose right-hand side
is the feature/output dependence vector. The primary solver traces the
nonnegative least-angle-regression path on that system; an independent
projected-gradient solver is kept alongside as a cross-check (the objective
is convex, so both must land on the same optimum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateProblemError
from .kernels import (
    Gram,
    KernelConfig,
    center_and_normalize,
    gaussian_gram_feature,
    gaussian_gram_output,
    median_width,
    standardize_column,
)

_JOIN_DENOM_EPS = 1e-12
_PG_MAX_ITER = 200_000


@dataclass
class HsicProblem:
    """The stack of normalized feature Grams plus the normalized output Gram.

    ``feature_grams[k]`` is the all-zero matrix when column k is degenerate
    (constant over the sample, or wiped out by adjacency masking).
    """

    feature_grams: np.ndarray  # (d, n, n)
    output_gram: np.ndarray  # (n, n)
    degenerate_features: frozenset[int]
    output_degenerate: bool = False
    _inner: np.ndarray | None = field(default=None, repr=False)
    _outer: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.output_gram.shape[0]

    @property
    def d(self) -> int:
        return self.feature_grams.shape[0]

    def usable_mask(self) -> np.ndarray:
        mask = np.ones(self.d, dtype=bool)
        if self.degenerate_features:
            mask[list(self.degenerate_features)] = False
        return mask

    def feature_nhsic(self) -> np.ndarray:
        """d x d table of pairwise feature dependence scores (design Gram)."""
        if self._inner is None:
            flat = self.feature_grams.reshape(self.d, -1)
            self._inner = flat @ flat.T
        return self._inner

    def output_nhsic(self) -> np.ndarray:
        """Per-feature dependence on the output (design^T response)."""
        if self._outer is None:
            flat = self.feature_grams.reshape(self.d, -1)
            self._outer = flat @ self.output_gram.reshape(-1)
        return self._outer

    @property
    def output_norm_sq(self) -> float:
        return float(np.sum(self.output_gram * self.output_gram))


@dataclass(frozen=True)
class SolverConfig:
    """Termination settings for the solvers.

    For the path solver exactly one of ``rho`` (stop at a penalty level) or
    ``target_nonzeros`` (stop at an active-set size) must be set. The
    projected-gradient solver takes rho as an explicit argument and uses
    only ``max_iterations``/``tolerance`` from here.
    """

    rho: float | None = None
    target_nonzeros: int | None = None
    max_iterations: int | None = None
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.rho is not None and self.target_nonzeros is not None:
            raise ValueError("set rho or target_nonzeros, not both")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.target_nonzeros is not None and self.target_nonzeros < 1:
            raise ValueError("target_nonzeros must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class PathStep:
    """One change of the active set: ``entered`` is False for a drop."""

    step: int
    feature: int
    entered: bool
    beta: np.ndarray


@dataclass(frozen=True)
class Coefficients:
    """Solver output: nonnegative weights plus the active-set history.

    ``complete`` is False when the path ran out of iterations before its
    stopping condition; the partial solution is still returned.
    ``stop_correlation`` is the largest residual correlation at the stop,
    i.e. the effective penalty level of the returned solution.
    """

    beta: np.ndarray
    path: tuple[PathStep, ...] = ()
    complete: bool = True
    stop_correlation: float = 0.0

    def support(self, tol: float = 0.0) -> list[int]:
        return [int(j) for j in np.where(self.beta > tol)[0]]


def problem_from_matrices(X, Y, config: KernelConfig | None = None, adjacency=None) -> HsicProblem:
    """Build the Gram stack from a raw sample matrix and output matrix.

    Feature columns are standardized over the sample before kernelization so
    one width setting is meaningful across heterogeneous features; constant
    columns are flagged degenerate instead. ``adjacency``, when given, is a
    dense 0/1 matrix (unit diagonal) multiplied into every Gram before
    centering.
    """
    config = config or KernelConfig()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D (samples x features)")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples")
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != n:
        raise ValueError("X and Y disagree on the number of samples")

    sigma_y = config.sigma_y if not isinstance(config.sigma_y, str) else median_width(Y)
    out = gaussian_gram_output(Y, sigma_y)
    if adjacency is not None:
        out = Gram(out.values * adjacency)
    out_bar = center_and_normalize(out)

    grams = np.zeros((d, n, n))
    degenerate: set[int] = set()
    for k in range(d):
        z, flat = standardize_column(X[:, k])
        if flat:
            degenerate.add(k)
            continue
        sigma = config.sigma_x if not isinstance(config.sigma_x, str) else median_width(z)
        gram = gaussian_gram_feature(z, sigma)
        if adjacency is not None:
            gram = Gram(gram.values * adjacency)
        gram_bar = center_and_normalize(gram)
        if gram_bar.degenerate:
            degenerate.add(k)
            continue
        grams[k] = gram_bar.values

    if len(degenerate) == d:
        raise DegenerateProblemError(
            "every feature is constant over the sample; nothing to select"
        )
    return HsicProblem(
        feature_grams=grams,
        output_gram=out_bar.values,
        degenerate_features=frozenset(degenerate),
        output_degenerate=out_bar.degenerate,
    )


def build_problem(sample, config: KernelConfig | None = None, graph=None) -> HsicProblem:
    """Assemble the regression problem for a local sample.

    With ``config.use_adjacency_mask`` set, every Gram is restricted to the
    sample's internal edges (self-loops kept) before centering; ``graph``
    is required in that case.
    """
    config = config or KernelConfig()
    adjacency = None
    if config.use_adjacency_mask:
        if graph is None:
            raise ValueError("adjacency masking requires the graph")
        adjacency = graph.adjacency_submatrix(sample.node_ids)
    return problem_from_matrices(sample.features, sample.predictions, config, adjacency)


def _check_beta(problem: HsicProblem, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (problem.d,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({problem.d},)")
    if np.any(beta < 0):
        raise ValueError("beta must be nonnegative")
    return beta


def objective(problem: HsicProblem, beta, rho: float) -> float:
    """Penalized residual computed directly from the Gram matrices."""
    beta = _check_beta(problem, beta)
    residual = problem.output_gram - np.tensordot(beta, problem.feature_grams, axes=1)
    return 0.5 * float(np.sum(residual * residual)) + rho * float(beta.sum())


def objective_via_nhsic(problem: HsicProblem, beta, rho: float) -> float:
    """Same objective evaluated from precomputed dependence scores only.

    1/2 sum_{k,m} beta_k beta_m score(f_k, f_m) - sum_k beta_k score(f_k, y)
    + 1/2 score(y, y) + rho ||beta||_1, which equals :func:`objective`
    exactly; both forms are kept as a cross-check on the Gram algebra.
    """
    beta = _check_beta(problem, beta)
    inner = problem.feature_nhsic()
    outer = problem.output_nhsic()
    return (
        0.5 * float(beta @ inner @ beta)
        - float(outer @ beta)
        + 0.5 * problem.output_norm_sq
        + rho * float(beta.sum())
    )


def top_k(beta, k: int) -> list[int]:
    """Indices of the k largest weights, descending, ties by ascending index.

    Zero weights are never reported, so the result may be shorter than k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(beta, Coefficients):
        beta = beta.beta
    beta = np.asarray(beta, dtype=float)
    order = np.argsort(-beta, kind="stable")
    return [int(j) for j in order if beta[j] > 0.0][:k]


def _solve_direction(gram_active: np.ndarray) -> np.ndarray:
    ones = np.ones(gram_active.shape[0])
    try:
        return scipy.linalg.solve(gram_active, ones, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(gram_active, ones, rcond=None)[0]


def solve_nonnegative_lars(problem: HsicProblem, config: SolverConfig) -> Coefficients:
    """Trace the nonnegative least-angle path on the vectorized regression.

    All arithmetic runs on the d x d dependence table: residual correlations
    are ``c = b - G beta``, the equiangular move ``w`` solves
    ``G[A, A] w = 1`` so every active correlation decays at unit rate per
    unit step, and events are (a) an inactive feature's correlation catching
    up (it joins), (b) an active weight hitting zero (it drops), (c) the
    common correlation reaching ``rho`` or zero. With ``target_nonzeros``
    the path stops exactly where the (K+1)-th feature would join, so all K
    active features carry their path weights and the KKT conditions hold at
    the stop's effective penalty.
    """
    if (config.rho is None) == (config.target_nonzeros is None):
        raise ValueError("exactly one of rho / target_nonzeros must be set")
    usable = problem.usable_mask()
    if not usable.any():
        raise DegenerateProblemError("no usable features")

    d = problem.d
    gram = problem.feature_nhsic()
    b = problem.output_nhsic()
    rho = config.rho
    target = config.target_nonzeros
    tol = config.tolerance
    max_iter = config.max_iterations if config.max_iterations is not None else 4 * d
    floor = rho if rho is not None else 0.0

    beta = np.zeros(d)
    active: list[int] = []
    in_active = np.zeros(d, dtype=bool)
    path: list[PathStep] = []
    complete = True

    def record(feature: int, entered: bool) -> None:
        path.append(PathStep(len(path), feature, entered, beta.copy()))

    # First activation: the feature most correlated with the output.
    c = b.copy()
    masked = np.where(usable, c, -np.inf)
    j0 = int(np.argmax(masked))
    if not np.isfinite(masked[j0]) or masked[j0] <= floor + tol:
        return Coefficients(beta, (), True, float(max(masked[j0], 0.0)))
    active.append(j0)
    in_active[j0] = True
    record(j0, True)

    steps = 0
    while True:
        c = b - gram @ beta
        corr = float(np.max(c[active]))
        if rho is not None and corr <= rho + tol:
            break
        if steps >= max_iter:
            complete = False
            break
        steps += 1

        idx = np.asarray(active)
        w = _solve_direction(gram[np.ix_(idx, idx)])
        rate = gram[:, idx] @ w  # unit on the active set by construction

        # Terminal events: correlations decay to rho (or to zero).
        gamma = corr if rho is None else corr - rho
        event: tuple[str, int] = ("stop", -1)

        # Join events: an inactive feature's correlation catches the pack.
        join_mask = usable & ~in_active
        denom = 1.0 - rate
        with np.errstate(divide="ignore", invalid="ignore"):
            join_gamma = (corr - c) / denom
        join_ok = join_mask & (denom > _JOIN_DENOM_EPS) & (join_gamma > -1e-10)
        if join_ok.any():
            candidates = np.where(join_ok, np.maximum(join_gamma, 0.0), np.inf)
            j = int(np.argmin(candidates))
            if candidates[j] < gamma:
                gamma = float(candidates[j])
                event = ("join", j)

        # Drop events: an active weight would cross zero.
        falling = w < -_JOIN_DENOM_EPS
        if falling.any():
            drop_gamma = beta[idx[falling]] / -w[falling]
            order = np.argsort(drop_gamma, kind="stable")
            g = float(drop_gamma[order[0]])
            if g < gamma:
                gamma = g
                event = ("drop", int(idx[falling][order[0]]))

        beta[idx] += gamma * w
        np.maximum(beta, 0.0, out=beta)

        kind, feature = event
        if kind == "stop":
            break
        if kind == "drop":
            beta[feature] = 0.0
            active.remove(feature)
            in_active[feature] = False
            record(feature, False)
            if not active:
                break
            continue
        # join
        if target is not None and len(active) >= target:
            break  # exactly the path point where one more feature would enter
        active.append(feature)
        in_active[feature] = True
        record(feature, True)

    c = b - gram @ beta
    stop_corr = float(np.max(np.where(usable, c, -np.inf)))
    return Coefficients(beta, tuple(path), complete, max(stop_corr, 0.0))


def solve_projected_gradient(problem: HsicProblem, rho: float, config: SolverConfig | None = None) -> Coefficients:
    """Independent solver: proximal gradient with nonnegative soft-thresholding.

    Runs plain ISTA with step 1/L on the vectorized quadratic and stops when
    both the per-iteration objective decrease and the KKT residual fall
    below the tolerance. Used to cross-check the path solver: convexity
    forces both onto the same optimum at matched rho.
    """
    if not rho > 0:
        raise ValueError("rho must be strictly positive")
    config = config or SolverConfig()
    usable = problem.usable_mask()
    if not usable.any():
        raise DegenerateProblemError("no usable features")

    gram = problem.feature_nhsic()
    b = problem.output_nhsic()
    y_sq = problem.output_norm_sq
    lipschitz = float(np.linalg.eigvalsh(gram)[-1])
    if lipschitz < _JOIN_DENOM_EPS:
        return Coefficients(np.zeros(problem.d), (), True, 0.0)
    step = 1.0 / lipschitz
    tol = config.tolerance
    max_iter = config.max_iterations if config.max_iterations is not None else _PG_MAX_ITER

    beta = np.zeros(problem.d)

    def value(vec: np.ndarray) -> float:
        return 0.5 * float(vec @ gram @ vec) - float(b @ vec) + 0.5 * y_sq + rho * float(vec.sum())

    prev = value(beta)
    complete = False
    for _ in range(max_iter):
        grad = gram @ beta - b
        beta = np.maximum(0.0, beta - step * (grad + rho))
        grad = gram @ beta - b
        stationarity = grad + rho
        support = beta > 0
        residual = 0.0
        if support.any():
            residual = float(np.max(np.abs(stationarity[support])))
        residual = max(residual, float(np.max(np.maximum(0.0, -stationarity))))
        current = value(beta)
        if residual < tol and prev - current < tol:
            complete = True
            break
        prev = current

    stop_corr = float(np.max(np.where(usable, b - gram @ beta, -np.inf)))
    return Coefficients(beta, (), complete, max(stop_corr, 0.0))


class HsicLassoSelector(SelectorMixin, BaseEstimator):
    """Nonlinear feature selection over a plain (X, y) sample.

    Scikit-learn-compatible face of the solver: ``fit`` builds one Gaussian
    Gram per feature column and one for the outputs, solves the nonnegative
    lasso over them, and keeps the ``top_k`` positive-weight features.
    Integer label vectors are one-hot encoded before kernelization;
    float targets are used as-is.

    Attributes
    ----------
    beta_ : ndarray of shape (n_features,)
        Nonnegative feature weights.
    selected_ : tuple of int
        Chosen feature indices, descending by weight.
    """

    def __init__(
        self,
        top_k: int = 10,
        rho: float | None = None,
        sigma_x: float | str = "auto",
        sigma_y: float | str = "auto",
        max_iterations: int | None = None,
        tolerance: float = 1e-7,
    ):
        self.top_k = top_k
        self.rho = rho
        self.sigma_x = sigma_x
        self.sigma_y = sigma_y
        self.max_iterations = max_iterations
        self.tolerance = tolerance

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y)
        if y.ndim == 1 and np.issubdtype(y.dtype, np.integer):
            classes = int(y.max()) + 1
            onehot = np.zeros((y.size, classes))
            onehot[np.arange(y.size), y] = 1.0
            target = onehot
        else:
            target = np.asarray(y, dtype=float)
        problem = problem_from_matrices(
            X, target, KernelConfig(sigma_x=self.sigma_x, sigma_y=self.sigma_y)
        )
        if self.rho is not None:
            solver_config = SolverConfig(
                rho=self.rho,
                max_iterations=self.max_iterations,
                tolerance=self.tolerance,
            )
        else:
            solver_config = SolverConfig(
                target_nonzeros=self.top_k,
                max_iterations=self.max_iterations,
                tolerance=self.tolerance,
            )
        coef = solve_nonnegative_lars(problem, solver_config)
        self.beta_ = coef.beta
        self.path_ = coef.path
        self.selected_ = tuple(top_k(coef, self.top_k))
        self.n_features_in_ = X.shape[1]
        mask = np.zeros(X.shape[1], dtype=bool)
        mask[list(self.selected_)] = True
        self.support_mask_ = mask
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_
