"""
One-dimensional Gaussian mixture models fitted by Expectation-Maximization.

EM is seeded with a k-means++ draw: the first centroid is a uniformly chosen
sample, later ones are drawn with probability proportional to the squared
distance to the nearest centroid already chosen. Samples are then hard
assigned to their nearest centroid to obtain initial variances and weights.
All densities are evaluated in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

VARIANCE_FLOOR = 1e-12
MIN_COMPONENT_MASS = 1e-10
INIT_REDRAWS = 10
LOG_2PI = math.log(2.0 * math.pi)


class DegenerateComponentError(ValueError):
    """A mixture component lost (almost) all of its responsibility mass."""


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        m = np.array(self.means, dtype=float).reshape(-1)
        v = np.array(self.variances, dtype=float).reshape(-1)
        if w.size < 1 or not (w.size == m.size == v.size):
            raise ValueError("weights, means and variances must share a length K >= 1")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise ValueError("mixture parameters must be finite")
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError(f"weights must lie in (0, 1]: {w}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum():.15g})")
        if np.any(v < VARIANCE_FLOOR):
            raise ValueError(f"variances must be >= {VARIANCE_FLOOR}")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def normalized(cls, weights, means, variances) -> "GmmParams":
        """Build params after rescaling ``weights`` to sum to one (e.g. rounded table values)."""
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), means, variances)

    @property
    def k(self) -> int:
        return self.weights.size

    def permuted(self, order) -> "GmmParams":
        order = np.asarray(order)
        return GmmParams(self.weights[order], self.means[order], self.variances[order])

    def sorted_by_mean(self) -> "GmmParams":
        return self.permuted(np.argsort(self.means, kind="stable"))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmParams":
        return cls(d["weights"], d["means"], d["variances"])


@dataclass
class FitTrace:
    log_likelihood: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    def is_monotonic(self, slack: float = 1e-9) -> bool:
        ll = np.asarray(self.log_likelihood)
        return bool(np.all(np.diff(ll) >= -slack))

    def to_dict(self) -> dict:
        return {"n_iter": self.n_iter, "converged": self.converged,
                "log_likelihood": list(self.log_likelihood)}


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 500
    tol: float = 1e-8
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _as_samples(data) -> np.ndarray:
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("data must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    return x


def _weighted_log_densities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    """log(pi_k N(x_m | mu_k, var_k)) laid out as (K, M) so reductions run over contiguous rows."""
    out = x[None, :] - params.means[:, None]
    np.square(out, out=out)
    out *= (-0.5 / params.variances)[:, None]
    out += (np.log(params.weights) - 0.5 * (LOG_2PI + np.log(params.variances)))[:, None]
    return out


def gmm_pdf(params: GmmParams, x):
    """Mixture density at ``x`` (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    out = np.exp(logsumexp(_weighted_log_densities(xa.reshape(-1), params), axis=0))
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)


def _e_step_with_ll(x: np.ndarray, params: GmmParams) -> tuple[np.ndarray, float]:
    """(K, M) responsibilities and the log-likelihood they were computed at."""
    # In-place log-sum-exp; the shifted exponentials double as unnormalised responsibilities.
    resp = _weighted_log_densities(x, params)
    shift = resp.max(axis=0)
    resp -= shift
    np.exp(resp, out=resp)
    total = resp.sum(axis=0)
    ll = float(np.sum(shift + np.log(total)))
    if not math.isfinite(ll):
        raise ValueError("log-likelihood is not finite for this data/parameter combination")
    resp /= total
    return resp, ll


def _m_step(x: np.ndarray, resp: np.ndarray) -> GmmParams:
    mass = resp.sum(axis=1)
    if np.any(mass < MIN_COMPONENT_MASS):
        bad = np.flatnonzero(mass < MIN_COMPONENT_MASS).tolist()
        raise DegenerateComponentError(f"components {bad} have vanishing mass {mass[bad]}")
    means = (resp * x).sum(axis=1) / mass
    sq = x[None, :] - means[:, None]
    np.square(sq, out=sq)
    sq *= resp
    variances = np.maximum(sq.sum(axis=1) / mass, VARIANCE_FLOOR)
    return GmmParams(mass / mass.sum(), means, variances)


def log_likelihood(data, params: GmmParams) -> float:
    """Sum over samples of the log mixture density."""
    return _e_step_with_ll(_as_samples(data), params)[1]


def e_step(data, params: GmmParams) -> np.ndarray:
    """Responsibilities rho[m, k], shape (M, K); each row sums to one."""
    return _e_step_with_ll(_as_samples(data), params)[0].T


def m_step(data, resp) -> GmmParams:
    """Weighted means, variances (about the new means) and weights from (M, K) responsibilities."""
    x = _as_samples(data)
    resp = np.asarray(resp, dtype=float)
    if resp.ndim != 2 or resp.shape[0] != x.size:
        raise ValueError("responsibilities must have shape (M, K)")
    return _m_step(x, resp.T)


def kmeans_pp_init(data, k: int, seed=None) -> GmmParams:
    """k-means++ centroids, then hard-assignment variances and weights.

    Distances are squared Euclidean on the scalar samples. ``seed`` may be an
    int, a SeedSequence or a Generator; equal seeds give equal output.
    """
    x = _as_samples(data)
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.unique(x).size < k:
        raise ValueError(f"need at least {k} distinct values to seed {k} components")
    rng = np.random.default_rng(seed)
    m = x.size

    centroids = np.empty(k)
    centroids[0] = x[rng.integers(m)]
    d2 = (x - centroids[0]) ** 2
    for j in range(1, k):
        centroids[j] = x[rng.choice(m, p=d2 / d2.sum())]
        d2 = np.minimum(d2, (x - centroids[j]) ** 2)

    for _ in range(INIT_REDRAWS + 1):
        labels = np.argmin(np.abs(x[:, None] - centroids[None, :]), axis=1)
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        j = empty[0]
        others = np.delete(centroids, j)
        d2 = np.min((x[:, None] - others[None, :]) ** 2, axis=1)
        centroids[j] = x[rng.choice(m, p=d2 / d2.sum())]
    else:
        raise DegenerateComponentError(
            f"empty cluster persisted after {INIT_REDRAWS} centroid redraws"
        )

    variances = np.array([
        np.mean((x[labels == j] - centroids[j]) ** 2) for j in range(k)
    ])
    return GmmParams(counts / m, centroids, np.maximum(variances, VARIANCE_FLOOR))


def _run_em(x: np.ndarray, params: GmmParams, config: EmConfig) -> tuple[GmmParams, FitTrace]:
    resp, ll = _e_step_with_ll(x, params)
    trace = FitTrace([ll])
    for it in range(1, config.max_iter + 1):
        params = _m_step(x, resp)
        resp, ll_new = _e_step_with_ll(x, params)
        trace.log_likelihood.append(ll_new)
        trace.n_iter = it
        if abs(ll_new - ll) < config.tol:
            trace.converged = True
            break
        ll = ll_new
    return params, trace


def fit_em(data, k: int = 5, config: EmConfig | None = None) -> tuple[GmmParams, FitTrace]:
    """Best-of-``restarts`` EM fit; each restart gets its own k-means++ seed."""
    config = config or EmConfig()
    x = _as_samples(data)
    if x.size < k:
        raise ValueError(f"need at least k={k} samples, got {x.size}")
    best = None
    last_error = None
    for child in np.random.SeedSequence(config.seed).spawn(config.restarts):
        try:
            params, trace = _run_em(x, kmeans_pp_init(x, k, child), config)
        except DegenerateComponentError as exc:
            last_error = exc
            continue
        if best is None or trace.log_likelihood[-1] > best[1].log_likelihood[-1]:
            best = (params, trace)
    if best is None:
        raise DegenerateComponentError(
            f"all {config.restarts} restarts failed; last error: {last_error}"
        )
    return best


POOLED_ID = "ALL"


@dataclass
class ConstellationModel:
    links: dict[str, GmmParams]
    pooled: GmmParams | None
    traces: dict[str, FitTrace] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {link: p.to_dict() for link, p in self.links.items()}
        if self.pooled is not None:
            out[POOLED_ID] = self.pooled.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConstellationModel":
        links = {key: GmmParams.from_dict(v) for key, v in d.items() if key != POOLED_ID}
        pooled = GmmParams.from_dict(d[POOLED_ID]) if POOLED_ID in d else None
        return cls(links, pooled)


def _link_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def fit_constellation(link_data, k: int = 5, config: EmConfig | None = None) -> ConstellationModel:
    """Fit every link independently plus one pooled model over all samples.

    ``link_data`` maps link ids to sample arrays (a plain sequence is keyed by
    position). A failing link is recorded in ``errors`` and skipped.
    """
    config = config or EmConfig()
    if not isinstance(link_data, dict):
        link_data = {str(i): d for i, d in enumerate(link_data)}
    if POOLED_ID in link_data:
        raise ValueError(f"link id {POOLED_ID!r} is reserved for the pooled model")

    model = ConstellationModel({}, None)
    for index, (link, data) in enumerate(link_data.items()):
        cfg = EmConfig(config.max_iter, config.tol, _link_seed(config.seed, index), config.restarts)
        try:
            params, trace = fit_em(data, k, cfg)
        except ValueError as exc:
            model.errors[link] = f"{type(exc).__name__}: {exc}"
            continue
        model.links[link] = params
        model.traces[link] = trace

    pooled_data = np.concatenate([np.asarray(d, dtype=float).reshape(-1) for d in link_data.values()])
    cfg = EmConfig(config.max_iter, config.tol, _link_seed(config.seed, len(link_data)), config.restarts)
    try:
        model.pooled, model.traces[POOLED_ID] = fit_em(pooled_data, k, cfg)
    except ValueError as exc:
        model.errors[POOLED_ID] = f"{type(exc).__name__}: {exc}"
    return model


def match_components(reference: GmmParams, fitted: GmmParams) -> np.ndarray:
    """Greedy pairing by closest means.

    Returns ``order`` such that ``fitted.permuted(order)`` lines up with
    ``reference`` component by component.
    """
    if reference.k != fitted.k:
        raise ValueError("mixtures have different component counts")
    cost = np.abs(reference.means[:, None] - fitted.means[None, :])
    order = np.full(reference.k, -1)
    free_ref = set(range(reference.k))
    free_fit = set(range(fitted.k))
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), fitted.k)
        if i in free_ref and j in free_fit:
            order[i] = j
            free_ref.discard(i)
            free_fit.discard(j)
    return order
