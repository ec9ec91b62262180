"""Extremal-instance search: simulated annealing over leaf log-densities
maximizing testing-to-bump ratio objectives.

The search space is the pair of leaf log-density vectors; the sparse
family is re-derived from sigma by the stopping-time construction (or
kept fixed), so every candidate is a valid instance with no repair step.
Everything is deterministic given (objective, config).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .dyadic import (DomainError, Instance, NumericError, SparseFamily,
                     TreeGeometry, WeightPair, generate_sparse,
                     stopping_time_family, DENSITY_FLOOR)
from .bumps import (BumpSpec, YoungSpec, ensure_admissible, entropy_constant,
                    maximal_bound_constant, nu_constant, orlicz_li_constant,
                    sepcon_constant)
from .testing import maximal_norm_lower, testing_constant

OBJECTIVE_KINDS = ("main_theorem", "conjecture_nc", "conjecture_sepcon",
                   "maximal_bound", "prop31_orlicz", "prop31_entropy")


@dataclass(frozen=True)
class Objective:
    kind: str
    p: float = 2.0
    spec: BumpSpec = field(default_factory=BumpSpec)
    young: YoungSpec = field(default_factory=lambda: YoungSpec("power_over_log", 2.0, 1.0))

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise DomainError(f"unknown objective kind {self.kind!r}")


@dataclass(frozen=True)
class SearchConfig:
    depth: int = 4
    eta: float = 0.5
    strategy: str = "stopping_time"
    dist: str = "lognormal"
    dist_params: tuple = (0.0, 1.0)
    steps: int = 1000
    t0: float = 0.5
    gamma: float = 0.999
    seed: int = 0
    parallel: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError("steps must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError("gamma must lie in (0, 1)")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["dist_params"] = list(self.dist_params)
        return d


@dataclass
class SearchResult:
    best_ratio: float
    best_instance: dict
    trace: list
    evaluations: int
    sub_ap_fraction: float  # fraction of family cubes with w_Q sigma_Q^{p-1} < 1

    def to_json_dict(self) -> dict:
        return {"best_ratio": self.best_ratio, "best_instance": self.best_instance,
                "trace": self.trace, "evaluations": self.evaluations,
                "sub_ap_fraction": self.sub_ap_fraction}


def _draw_leaves(rng, n: int, dist: str, params) -> np.ndarray:
    if dist == "lognormal":
        mu, s = params
        return np.exp(mu + s * rng.standard_normal(n))
    if dist == "spike":
        mass_frac, support_frac = params
        support = max(1, int(round(support_frac * n)))
        out = np.full(n, DENSITY_FLOOR)
        out[:support] = mass_frac * n / support
        return out
    if dist == "mixed":
        if rng.random() < 0.5:
            return _draw_leaves(rng, n, "lognormal", (0.0, 1.5))
        support_frac = max(1.0 / n, float(rng.random()))
        return _draw_leaves(rng, n, "spike", (1.0, support_frac))
    raise DomainError(f"unknown leaf distribution {dist!r}")


def _build_family(config: SearchConfig, geometry: TreeGeometry,
                  sigma: np.ndarray, seed: int) -> SparseFamily:
    return generate_sparse(geometry, config.strategy, config.eta, seed,
                           sigma_leaves=sigma)


def random_instance(config: SearchConfig, seed: int) -> Instance:
    """Deterministic random weight pair plus derived sparse family."""
    rng = np.random.default_rng(np.uint64(seed))
    geometry = TreeGeometry(config.depth)
    n = geometry.n_leaves
    sigma = _draw_leaves(rng, n, config.dist, config.dist_params)
    w = _draw_leaves(rng, n, "lognormal", (0.0, 1.0))
    # objective p is attached at evaluation time; store a placeholder
    pair = WeightPair(geometry, w, sigma, 2.0)
    family = _build_family(config, geometry, sigma, seed)
    sparse_cfg = {"strategy": config.strategy, "eta": config.eta, "seed": seed}
    return Instance(pair, family, sparse_cfg)


def evaluate(objective: Objective, instance: Instance) -> float:
    """Objective ratio (numerator over bump constant) for one instance."""
    pair = instance.pair
    if abs(pair.p - objective.p) > 1e-12:
        pair = WeightPair(pair.geometry, pair.w_leaves, pair.sigma_leaves, objective.p)
    S = instance.family
    kind = objective.kind
    if kind == "main_theorem":
        num, _ = testing_constant(pair, S)
        den = nu_constant(pair, objective.spec, S) ** (1.0 / pair.p)
    elif kind == "conjecture_nc":
        num, _ = testing_constant(pair, S)
        den = maximal_bound_constant(pair, objective.spec, "all")
    elif kind == "conjecture_sepcon":
        num, _ = testing_constant(pair, S)
        den = sepcon_constant(pair, objective.young, "all")
    elif kind == "maximal_bound":
        num = maximal_norm_lower(pair, budget=8, seed=1)
        den = maximal_bound_constant(pair, objective.spec, "all")
    elif kind == "prop31_orlicz":
        num, _ = testing_constant(pair, S)
        den, _ = orlicz_li_constant(pair, objective.young, objective.spec, "all")
    elif kind == "prop31_entropy":
        num, _ = testing_constant(pair, S)
        den = entropy_constant(pair, objective.spec, "all")
    else:  # pragma: no cover
        raise DomainError(kind)
    if den < 1e-300:
        raise NumericError("objective denominator underflowed")
    return num / den


def _instance_from_state(config: SearchConfig, log_w, log_sigma, p: float,
                         family_seed: int) -> Instance:
    geometry = TreeGeometry(config.depth)
    w = np.exp(log_w)
    sigma = np.exp(log_sigma)
    pair = WeightPair(geometry, w, sigma, p)
    family = _build_family(config, geometry, sigma, family_seed)
    sparse_cfg = {"strategy": config.strategy, "eta": config.eta, "seed": family_seed}
    return Instance(pair, family, sparse_cfg)


def _sub_ap_fraction(instance: Instance, p: float) -> float:
    pair = instance.pair
    if abs(pair.p - p) > 1e-12:
        pair = WeightPair(pair.geometry, pair.w_leaves, pair.sigma_leaves, p)
    cubes = instance.family.sorted_cubes()
    below = sum(1 for q in cubes
                if pair.w_avg(q) * pair.sigma_avg(q) ** (p - 1.0) < 1.0)
    return below / len(cubes)


def anneal(objective: Objective, config: SearchConfig) -> SearchResult:
    """Simulated annealing over leaf log-densities with periodic restarts
    and stopping-time family refreshes; best instance re-verified."""
    ensure_admissible(objective.spec)
    rng = np.random.default_rng(np.uint64(config.seed))
    n = 1 << config.depth
    restart_every = max(1, config.steps // 10)
    refresh_every = max(1, config.steps // 20)

    def fresh(seed):
        inst = random_instance(config, seed)
        return np.log(inst.pair.w_leaves), np.log(inst.pair.sigma_leaves)

    log_w, log_sigma = fresh(config.seed)
    family_seed = config.seed
    current = _instance_from_state(config, log_w, log_sigma, objective.p, family_seed)
    cur_val = evaluate(objective, current)
    best_val, best_inst = cur_val, current
    trace = [best_val]
    temperature = config.t0
    evals = 1
    width = max(1, config.parallel)
    for step in range(1, config.steps):
        if step % restart_every == 0:
            log_w, log_sigma = fresh(config.seed + step)
            current = _instance_from_state(config, log_w, log_sigma,
                                           objective.p, family_seed)
            cur_val = evaluate(objective, current)
            evals += 1
        else:
            # width independent proposals; deterministic max-reduction
            proposals = []
            for _ in range(width):
                pw = log_w + 0.5 * rng.standard_normal(n)
                ps = log_sigma + 0.5 * rng.standard_normal(n)
                proposals.append((pw, ps))
            best_prop, best_prop_val = None, -math.inf
            for pw, ps in proposals:
                cand = _instance_from_state(config, pw, ps, objective.p, family_seed)
                val = evaluate(objective, cand)
                evals += 1
                if val > best_prop_val:
                    best_prop_val, best_prop = val, (pw, ps, cand)
            delta = best_prop_val - cur_val
            if delta >= 0 or rng.random() < math.exp(delta / max(temperature, 1e-12)):
                log_w, log_sigma, current = best_prop
                cur_val = best_prop_val
        if step % refresh_every == 0 and config.strategy == "stopping_time":
            current = _instance_from_state(config, log_w, log_sigma,
                                           objective.p, family_seed)
            cur_val = evaluate(objective, current)
            evals += 1
        if cur_val > best_val:
            best_val, best_inst = cur_val, current
        trace.append(best_val)
        temperature *= config.gamma

    # re-verify the best instance by recomputation from its serialized form
    from .dyadic import instance_from_dict
    stored = best_inst.to_json_dict()
    stored["p"] = objective.p
    replay = evaluate(objective, instance_from_dict(stored))
    if not math.isclose(replay, best_val, rel_tol=1e-9):
        raise NumericError(
            f"best ratio failed re-verification: {best_val} vs {replay}")
    return SearchResult(best_ratio=best_val, best_instance=stored, trace=trace,
                        evaluations=evals,
                        sub_ap_fraction=_sub_ap_fraction(best_inst, objective.p))


def depth_sweep(objective: Objective, config: SearchConfig, depths,
                timing: bool = False):
    """anneal per depth with derived seeds; rows of
    (depth, best_ratio, evaluations, seconds).  seconds is 0.0 unless
    timing is requested, keeping the CSV byte-reproducible."""
    rows = []
    for depth in depths:
        cfg = SearchConfig(depth=depth, eta=config.eta, strategy=config.strategy,
                           dist=config.dist, dist_params=config.dist_params,
                           steps=config.steps, t0=config.t0, gamma=config.gamma,
                           seed=config.seed + 7919 * depth, parallel=config.parallel)
        start = time.perf_counter()
        result = anneal(objective, cfg)
        seconds = time.perf_counter() - start if timing else 0.0
        rows.append((depth, result.best_ratio, result.evaluations, seconds))
    return rows


def sweep_csv(rows) -> str:
    lines = ["depth,best_ratio,evaluations,seconds"]
    for depth, ratio, evals, seconds in rows:
        lines.append(f"{depth},{ratio:.17g},{evals},{seconds:.17g}")
    return "\n".join(lines) + "\n"
