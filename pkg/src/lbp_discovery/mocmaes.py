"""Multi-objective CMA-ES with (1+1) success-rule adaptation.

Each of the ``mu`` parents produces one offspring per generation.  The
2*mu pool is ranked by non-dominated sorting, then the critical front is
thinned by repeatedly discarding the point with the smallest contributing
hypervolume.  An offspring that survives counts as a success for both it and
its parent; success drives step-size and covariance adaptation.

All objectives are minimised.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "DimensionMismatch",
    "SizeMismatch",
    "PointNotInFront",
    "StrategyParams",
    "Individual",
    "Population",
    "dominates",
    "pareto_rank",
    "hypervolume_2d",
    "hypervolume",
    "contributing_hypervolume",
    "contribution_ranks",
    "init_population",
    "ask",
    "tell",
    "encode_categorical",
    "optimize",
]


class DimensionMismatch(ValueError):
    pass


class SizeMismatch(ValueError):
    pass


class PointNotInFront(ValueError):
    pass


@dataclass(frozen=True)
class StrategyParams:
    p_target: float
    c_p: float
    d: float
    c_c: float
    c_cov: float
    p_thresh: float = 0.44

    @classmethod
    def default(cls, n: int) -> "StrategyParams":
        p_target = 2.0 / 11.0
        return cls(
            p_target=p_target,
            c_p=p_target / (2.0 + p_target),
            d=1.0 + n / 2.0,
            c_c=2.0 / (n + 2.0),
            c_cov=2.0 / (n**2 + 6.0),
        )

    def __post_init__(self):
        for name in ("p_target", "c_p", "c_c", "c_cov", "p_thresh"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.d < 1.0:
            raise ValueError("damping d must be >= 1")


@dataclass
class Individual:
    x: np.ndarray
    sigma: float
    p_succ: float
    p_c: np.ndarray
    C: np.ndarray
    f: np.ndarray | None = None
    parent: int | None = None  # index of the generating parent, offspring only
    z: np.ndarray | None = field(default=None, repr=False)  # standard-normal draw

    def copy(self) -> "Individual":
        return Individual(
            self.x.copy(),
            self.sigma,
            self.p_succ,
            self.p_c.copy(),
            self.C.copy(),
            None if self.f is None else self.f.copy(),
            self.parent,
            None if self.z is None else self.z.copy(),
        )


@dataclass
class Population:
    parents: list[Individual]
    params: StrategyParams
    generation: int = 0
    f_ref: np.ndarray | None = None
    discarded: int = 0  # offspring dropped for non-finite objectives

    @property
    def mu(self) -> int:
        return len(self.parents)

    def objectives(self) -> np.ndarray:
        return np.array([p.f for p in self.parents])

    def front(self) -> np.ndarray:
        f = self.objectives()
        ranks = np.asarray(pareto_rank(f))
        return f[ranks == 1]


# -- Pareto machinery --------------------------------------------------------


def dominates(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def _as_points(points) -> np.ndarray:
    try:
        pts = np.asarray(points, dtype=float)
    except ValueError as err:
        raise DimensionMismatch("objective vectors differ in length") from err
    if pts.size == 0:
        return pts.reshape(0, 0)
    if pts.ndim != 2 or pts.shape[1] < 1:
        raise DimensionMismatch(f"expected a list of objective vectors, got shape {pts.shape}")
    return pts


def pareto_rank(points) -> list[int]:
    """Non-domination level of each point (1 = non-dominated)."""
    pts = _as_points(points)
    n = len(pts)
    if n == 0:
        return []
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    ranks = np.zeros(n, dtype=int)
    level = 1
    current = np.flatnonzero(counts == 0)
    while current.size:
        ranks[current] = level
        counts = counts - dom[current].sum(axis=0)
        counts[ranks > 0] = -1
        current = np.flatnonzero(counts == 0)
        level += 1
    return ranks.tolist()


def _inside(pts: np.ndarray, ref: np.ndarray) -> np.ndarray:
    keep = np.all(pts <= ref, axis=1)
    excluded = int(len(pts) - keep.sum())
    if excluded:
        log.warning("hypervolume: %d point(s) beyond the reference point excluded", excluded)
    return pts[keep]


def hypervolume_2d(points, f_ref) -> float:
    """Exact 2-D hypervolume by sort-and-sweep."""
    ref = np.asarray(f_ref, dtype=float)
    pts = _as_points(points)
    if pts.size == 0:
        return 0.0
    if pts.shape[1] != 2 or ref.shape != (2,):
        raise DimensionMismatch("hypervolume_2d needs 2-objective points and reference")
    pts = _inside(pts, ref)
    if len(pts) == 0:
        return 0.0
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    volume = 0.0
    best_f2 = ref[1]
    for f1, f2 in pts[order]:
        if f2 < best_f2:
            volume += (ref[0] - f1) * (best_f2 - f2)
            best_f2 = f2
    return float(volume)


def hypervolume(points, f_ref, rng=None, samples: int = 100_000) -> float:
    """Hypervolume for any number of objectives.

    Exact for one or two objectives; Monte Carlo estimate with ``samples``
    uniform draws otherwise.
    """
    ref = np.asarray(f_ref, dtype=float)
    pts = _as_points(points)
    if pts.size == 0:
        return 0.0
    if pts.shape[1] != ref.shape[0]:
        raise DimensionMismatch("points and reference differ in dimension")
    if pts.shape[1] == 2:
        return hypervolume_2d(pts, ref)
    pts = _inside(pts, ref)
    if len(pts) == 0:
        return 0.0
    if pts.shape[1] == 1:
        return float(ref[0] - pts[:, 0].min())
    rng = np.random.default_rng(0) if rng is None else rng
    lo = pts.min(axis=0)
    box = float(np.prod(ref - lo))
    if box == 0.0:
        return 0.0
    u = lo + rng.random((samples, len(ref))) * (ref - lo)
    hit = np.zeros(samples, dtype=bool)
    for p in pts:
        hit |= np.all(u >= p, axis=1)
    return box * hit.mean()


def contributing_hypervolume(a, front, f_ref) -> float:
    """Hypervolume lost when ``a`` is removed from ``front`` (one copy only)."""
    pts = _as_points(front)
    a = np.asarray(a, dtype=float)
    matches = np.flatnonzero(np.all(pts == a, axis=1)) if pts.size else []
    if len(matches) == 0:
        raise PointNotInFront(f"{a.tolist()} is not a member of the front")
    rest = np.delete(pts, matches[0], axis=0)
    return max(0.0, hypervolume(pts, f_ref) - hypervolume(rest, f_ref))


def _contributions(front: np.ndarray, f_ref: np.ndarray | None) -> np.ndarray:
    """Contribution of every member of a mutually non-dominated set.

    For two objectives the two boundary points get ``inf``.
    """
    n, m = front.shape
    if n == 1:
        return np.array([np.inf])
    if m == 2:
        order = np.lexsort((np.arange(n), front[:, 1], front[:, 0]))
        sf = front[order]
        contrib = np.empty(n)
        contrib[order[0]] = contrib[order[-1]] = np.inf
        for k in range(1, n - 1):
            contrib[order[k]] = (sf[k + 1, 0] - sf[k, 0]) * (sf[k - 1, 1] - sf[k, 1])
        return contrib
    ref = front.max(axis=0) + 1.0 if f_ref is None else np.maximum(f_ref, front.max(axis=0))
    total = hypervolume(front, ref)
    return np.array([total - hypervolume(np.delete(front, i, axis=0), ref) for i in range(n)])


def contribution_ranks(front, f_ref=None) -> list[int]:
    """Indices of ``front`` ordered by increasing contributing hypervolume.

    The first index is contribution rank 1 (the least contributing point);
    ties keep insertion order.
    """
    pts = _as_points(front)
    ref = None if f_ref is None else np.asarray(f_ref, dtype=float)
    contrib = _contributions(pts, ref)
    return sorted(range(len(pts)), key=lambda i: (contrib[i], i))


def _select(points: np.ndarray, mu: int, f_ref) -> list[int]:
    """Indices of the ``mu`` best points: by front, then by hypervolume contribution."""
    ranks = np.asarray(pareto_rank(points))
    chosen: list[int] = []
    for level in range(1, ranks.max() + 1):
        members = list(np.flatnonzero(ranks == level))
        if len(chosen) + len(members) <= mu:
            chosen.extend(members)
            continue
        while len(chosen) + len(members) > mu:
            contrib = _contributions(points[members], f_ref)
            # least contributor goes first; among ties the latest inserted
            worst = min(range(len(members)), key=lambda k: (contrib[k], -members[k]))
            members.pop(worst)
        chosen.extend(members)
        break
    return sorted(chosen)


# -- strategy ----------------------------------------------------------------


def init_population(
    xs: Sequence,
    sigma: float,
    f_values: Sequence,
    params: StrategyParams | None = None,
    f_ref=None,
) -> Population:
    """Population of evaluated starting points with identity covariance."""
    xs = [np.asarray(x, dtype=float) for x in xs]
    if len(xs) != len(f_values) or not xs:
        raise SizeMismatch("need one objective vector per starting point")
    n = len(xs[0])
    if any(len(x) != n for x in xs):
        raise DimensionMismatch("starting points differ in dimension")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    params = StrategyParams.default(n) if params is None else params
    parents = [
        Individual(x.copy(), float(sigma), params.p_target, np.zeros(n), np.eye(n), np.asarray(f, dtype=float))
        for x, f in zip(xs, f_values)
    ]
    ref = None if f_ref is None else np.asarray(f_ref, dtype=float)
    return Population(parents, params, 0, ref)


def ask(pop: Population, rng: np.random.Generator) -> list[Individual]:
    """One offspring per parent: x' = x + sigma * y with y ~ N(0, C)."""
    offspring = []
    for i, parent in enumerate(pop.parents):
        child = parent.copy()
        z = rng.standard_normal(len(parent.x))
        A = np.linalg.cholesky(parent.C)
        child.x = parent.x + parent.sigma * (A @ z)
        child.z = z
        child.f = None
        child.parent = i
        offspring.append(child)
    return offspring


def _update_step_size(ind: Individual, succ: float, params: StrategyParams) -> None:
    ind.p_succ = (1.0 - params.c_p) * ind.p_succ + params.c_p * succ
    ind.sigma *= math.exp((ind.p_succ - params.p_target) / (params.d * (1.0 - params.p_target)))


def _update_covariance(ind: Individual, x_step: np.ndarray, params: StrategyParams) -> None:
    c_c, c_cov = params.c_c, params.c_cov
    if ind.p_succ < params.p_thresh:
        ind.p_c = (1.0 - c_c) * ind.p_c + math.sqrt(c_c * (2.0 - c_c)) * x_step
        ind.C = (1.0 - c_cov) * ind.C + c_cov * np.outer(ind.p_c, ind.p_c)
    else:
        ind.p_c = (1.0 - c_c) * ind.p_c
        ind.C = (1.0 - c_cov) * ind.C + c_cov * (np.outer(ind.p_c, ind.p_c) + c_c * (2.0 - c_c) * ind.C)
    ind.C = 0.5 * (ind.C + ind.C.T)


def tell(pop: Population, offspring: Sequence[Individual], f_values: Sequence) -> Population:
    """Select the next parents from parents + offspring and adapt strategy state.

    Offspring with non-finite objectives are discarded (counted in
    ``Population.discarded``) and count as failures.  The input population is
    left untouched.
    """
    mu = pop.mu
    if len(offspring) != mu or len(f_values) != mu:
        raise SizeMismatch(f"expected {mu} offspring and objective vectors")
    params = pop.params
    parents = [p.copy() for p in pop.parents]
    children = [c.copy() for c in offspring]
    discarded = pop.discarded
    valid = []
    for child, f in zip(children, f_values):
        child.f = np.asarray(f, dtype=float)
        ok = bool(np.all(np.isfinite(child.f)))
        if not ok:
            discarded += 1
        valid.append(ok)

    f_ref = pop.f_ref
    if f_ref is None:
        finite = [p.f for p in parents] + [c.f for c, ok in zip(children, valid) if ok]
        f_ref = np.max(finite, axis=0) + 1.0

    pool = parents + [c for c, ok in zip(children, valid) if ok]
    pool_index = list(range(mu)) + [mu + i for i, ok in enumerate(valid) if ok]
    survivors = _select(np.array([q.f for q in pool]), mu, f_ref)
    surviving = {pool_index[k] for k in survivors}

    for i, child in enumerate(children):
        succ = 1.0 if (mu + i) in surviving else 0.0
        parent = parents[child.parent]
        old_sigma = pop.parents[child.parent].sigma
        _update_step_size(parent, succ, params)
        if not valid[i]:
            continue
        _update_step_size(child, succ, params)
        if succ:
            _update_covariance(child, (child.x - pop.parents[child.parent].x) / old_sigma, params)

    next_parents = [pool[k] for k in survivors]
    for ind in next_parents:
        ind.parent = None
        ind.z = None
    return replace(pop, parents=next_parents, generation=pop.generation + 1, f_ref=f_ref, discarded=discarded)


# -- helpers -----------------------------------------------------------------


def encode_categorical(space: Sequence[Sequence], x) -> list:
    """Map a point of [0, 1]^n to one choice per coordinate.

    Coordinates are clamped to [0, 1) and binned uniformly over each choice list.
    """
    x = np.asarray(x, dtype=float).ravel()
    if len(space) != len(x):
        raise DimensionMismatch(f"{len(space)} choice lists for a {len(x)}-dimensional point")
    out = []
    for choices, xj in zip(space, x):
        k = len(choices)
        xj = min(max(float(xj), 0.0), np.nextafter(1.0, 0.0))
        out.append(choices[min(int(math.floor(xj * k)), k - 1)])
    return out


def _trace_record(pop: Population) -> dict:
    sig = np.array([p.sigma for p in pop.parents])
    return {
        "generation": pop.generation,
        "objectives": pop.objectives().tolist(),
        "hypervolume": hypervolume(pop.front(), pop.f_ref) if pop.f_ref is not None else None,
        "sigma": {"min": float(sig.min()), "mean": float(sig.mean()), "max": float(sig.max())},
    }


def optimize(
    evaluate: Callable[[list[np.ndarray]], Sequence],
    x0: Sequence,
    sigma0: float,
    generations: int,
    rng: np.random.Generator,
    params: StrategyParams | None = None,
    f_ref=None,
    trace=None,
) -> Population:
    """Run the ask/tell loop.

    Parameters
    ----------
    evaluate
        Maps a list of search points to their objective vectors.  This is the
        caller's parallel region.
    x0
        Starting points; their count fixes ``mu``.
    trace
        Optional writable text stream receiving one JSON line per generation.
    """
    xs = [np.asarray(x, dtype=float) for x in x0]
    pop = init_population(xs, sigma0, evaluate(xs), params, f_ref)
    for _ in range(generations):
        kids = ask(pop, rng)
        pop = tell(pop, kids, evaluate([k.x for k in kids]))
        if trace is not None:
            trace.write(json.dumps(_trace_record(pop)) + "\n")
    return pop
