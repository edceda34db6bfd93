"""
Identification of a distribution over the dynamics parameters by matching
simulated torque trajectories against reference rollouts.

CMA-ES runs in scaled coordinates ``z = (phi - mean_init) / std_init`` and
the final search distribution is mapped back to physical units.
"""
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import json
import math

import numpy as np

from droid import log
from droid.cmaes import (
    CmaConfig,
    PositivityMask,
    SearchDistribution,
    cma_ask,
    cma_converged,
    cma_init,
    cma_tell,
    sample_masked,
)
from droid.config import DynParams, IdentifyConfig, PARAM_NAMES, WorldConfig
from droid.errors import InvalidInputError, SimulationDivergedError
from droid.simenv import Trajectory, playback
from droid.utils import derive_seed, print_progress_bar, write_csv

DIVERGED_FITNESS = 1e9
"Fitness given to candidates whose simulation diverged."


@dataclass(frozen=True)
class ParamDistribution:
    """Multivariate normal over the dynamics parameter vector."""

    names: Tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray
    positivity: np.ndarray = field(default_factory=lambda: np.ones(len(PARAM_NAMES), dtype=bool))

    def __post_init__(self) -> None:
        dim = len(self.names)
        if self.mean.shape != (dim,) or self.covariance.shape != (dim, dim) or len(self.positivity) != dim:
            raise InvalidInputError(f"Distribution over {dim} parameters has inconsistent shapes")

    @classmethod
    def from_init(cls, mean: DynParams, std: DynParams) -> "ParamDistribution":
        """Diagonal distribution from per-parameter means and standard deviations."""
        spread = std.to_vector()
        return cls(PARAM_NAMES, mean.to_vector(), np.diag(spread ** 2), np.ones(len(PARAM_NAMES), dtype=bool))

    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))

    def mean_params(self) -> DynParams:
        return DynParams.from_vector(self.mean)

    def sample(self, rng: np.random.Generator) -> DynParams:
        """
        One parameter set, redrawn until it satisfies positivity.

        :Raise InfeasibleDistributionError: If positivity can not be met.
        """
        mask = PositivityMask(np.asarray(self.positivity, dtype=bool))
        return DynParams.from_vector(sample_masked(self.mean, self.covariance, mask, rng, 1)[0])

    def to_json(self) -> Dict[str, Any]:
        return {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "positivity": [bool(v) for v in self.positivity],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "ParamDistribution":
        try:
            names = tuple(data["names"])
            dim = len(names)
            return cls(
                names,
                np.array(data["mean"], dtype=float),
                np.array(data["covariance"], dtype=float).reshape(dim, dim),
                np.array(data.get("positivity", [True] * dim), dtype=bool),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise InvalidInputError(f"Malformed parameter distribution document: {err}") from err

    def save(self, path: str) -> None:
        with open(path, "w") as fp:
            json.dump(self.to_json(), fp, indent=2)

    @classmethod
    def load(cls, path: str) -> "ParamDistribution":
        with open(path, "r") as fp:
            return cls.from_json(json.load(fp))


# Cost --------------------------------------------------------------------------
def trajectory_cost(sim: Trajectory, real_set: Sequence[Trajectory], failure_penalty: float) -> float:
    """
    Mean over the reference rollouts of the time-mean joint-torque residual
    norm, plus `failure_penalty` when the simulated rollout failed.
    """
    if not real_set:
        raise InvalidInputError("The set of reference trajectories is empty")
    total = 0.0
    for real in real_set:
        if not math.isclose(real.dt, sim.dt, rel_tol=1e-12, abs_tol=0.0):
            raise InvalidInputError(f"Time step mismatch: simulated dt={sim.dt}, reference dt={real.dt}")
        n = min(len(sim), len(real))
        residual = sim.torque[:n] - real.torque[:n]
        total += float(np.mean(np.linalg.norm(residual, axis=1)))
    penalty = failure_penalty if sim.failed else 0.0
    return total / len(real_set) + penalty


def candidate_fitness(
    phi: DynParams,
    q_desired: np.ndarray,
    real_set: Sequence[Trajectory],
    world: WorldConfig,
    cfg: IdentifyConfig,
    target_angle: Optional[float] = None,
) -> float:
    """Noise-free playback of `phi` scored against the reference set."""
    try:
        sim = playback(q_desired, phi, world, target_angle=target_angle)
    except SimulationDivergedError as err:
        log.debug(f"Candidate diverged: {err}")
        return DIVERGED_FITNESS
    return trajectory_cost(sim, real_set, cfg["failure_penalty"])


# Trace ---------------------------------------------------------------------------
class TraceRow(NamedTuple):
    generation: int
    best_fit: float
    mean_fit: float
    worst_fit: float
    evaluations: int
    mean: Tuple[float, ...]
    std: Tuple[float, ...]


@dataclass
class IdentifyTrace:
    """One record per completed generation, distribution taken before the update."""

    names: Tuple[str, ...] = PARAM_NAMES
    rows: List[TraceRow] = field(default_factory=list)

    @property
    def improving(self) -> bool:
        """Mean fitness of the last generation is not worse than the first one."""
        if len(self.rows) < 2:
            return True
        return self.rows[-1].mean_fit <= self.rows[0].mean_fit

    def best_fitness(self) -> float:
        return min((r.best_fit for r in self.rows), default=math.inf)

    def header(self) -> List[str]:
        columns = ["generation", "best_fit", "mean_fit"]
        for name in self.names:
            columns += [f"{name}_mean", f"{name}_std"]
        return columns + ["worst_fit", "evaluations"]

    def save(self, path: str) -> None:
        rows = []
        for r in self.rows:
            row: List[Any] = [r.generation, r.best_fit, r.mean_fit]
            for m, s in zip(r.mean, r.std):
                row += [m, s]
            rows.append(row + [r.worst_fit, r.evaluations])
        write_csv(path, self.header(), rows)


# Optimization -------------------------------------------------------------------
def _evaluate(
    candidates: List[DynParams],
    q_desired: np.ndarray,
    real_set: Sequence[Trajectory],
    world: WorldConfig,
    cfg: IdentifyConfig,
    target_angle: Optional[float],
) -> List[float]:
    if cfg["workers"] <= 1:
        return [candidate_fitness(phi, q_desired, real_set, world, cfg, target_angle) for phi in candidates]
    # Playback is CPU bound pure Python, so candidates go to worker processes.
    # Results are gathered in submission order.
    with ProcessPoolExecutor(max_workers=cfg["workers"]) as executor:
        futures = [
            executor.submit(candidate_fitness, phi, q_desired, real_set, world, cfg, target_angle)
            for phi in candidates
        ]
        return [f.result() for f in futures]


def optimize_distribution(
    phi_init: ParamDistribution,
    q_desired: np.ndarray,
    real_set: Sequence[Trajectory],
    world: WorldConfig,
    cfg: IdentifyConfig,
    fixed: Optional[Dict[str, float]] = None,
    target_angle: Optional[float] = None,
) -> Tuple[ParamDistribution, IdentifyTrace]:
    """
    Run CMA-ES over the parameter distribution until convergence.

    Parameters listed in `fixed` (and parameters with zero initial spread) are
    held at their value and excluded from the search.

    :Return: The optimized distribution (covariance includes the squared
             step size) and the per-generation trace.
    :Raise InfeasibleDistributionError: If positivity can not be met while sampling.
    """
    if len(real_set) != cfg["n_real"]:
        raise InvalidInputError(f"Expected {cfg['n_real']} reference trajectories, got {len(real_set)}")
    names = phi_init.names
    base = np.array(phi_init.mean, dtype=float)
    spread = phi_init.std()
    for name, value in (fixed or {}).items():
        if name not in names:
            raise InvalidInputError(f"Unknown parameter '{name}', known parameters are {', '.join(names)}")
        base[names.index(name)] = float(value)
    free = [i for i, name in enumerate(names) if name not in (fixed or {}) and spread[i] > 0]
    if not free:
        raise InvalidInputError("No free parameter to identify")
    mu, s = base[free], spread[free]

    cma_cfg = CmaConfig.for_dimension(
        len(free),
        population=cfg["population"],
        parents=cfg["parents"],
        max_generations=cfg["max_generations"],
        fitness_tolerance=cfg["fitness_tolerance"],
        seed=cfg["seed"],
    )
    mask = PositivityMask(np.asarray(phi_init.positivity, dtype=bool)[free], offset=mu, scale=s)
    dist = cma_init(np.zeros(len(free)), cfg["sigma0"], cma_cfg, names=[names[i] for i in free])

    def to_physical(z: np.ndarray) -> np.ndarray:
        vector = base.copy()
        vector[free] = mu + s * z
        return vector

    def effective_std(d: SearchDistribution) -> np.ndarray:
        std = np.zeros(len(names))
        std[free] = s * d.step_size * np.sqrt(np.maximum(np.diag(d.covariance), 0.0))
        return std

    trace = IdentifyTrace(names=tuple(names))
    history: List[float] = []
    evaluations = 0
    log.info(f"Identifying {len(free)} parameters, population {cfg['population']}, {cfg['n_real']} reference rollouts")
    while not cma_converged(dist, history, cma_cfg):
        candidates = cma_ask(dist, mask, derive_seed(cfg["seed"], dist.generation))
        params = [DynParams.from_vector(to_physical(z)) for z in candidates]
        fitnesses = _evaluate(params, q_desired, real_set, world, cfg, target_angle)
        evaluations += len(fitnesses)
        log.debug(f"Generation {dist.generation} fitnesses: {', '.join(f'{f:.5g}' for f in fitnesses)}")
        row = TraceRow(
            generation=dist.generation,
            best_fit=float(np.min(fitnesses)),
            mean_fit=float(np.mean(fitnesses)),
            worst_fit=float(np.max(fitnesses)),
            evaluations=evaluations,
            mean=tuple(float(v) for v in to_physical(dist.mean)),
            std=tuple(float(v) for v in effective_std(dist)),
        )
        trace.rows.append(row)
        history.append(row.best_fit)
        log.info(
            f"Generation {row.generation}: best {row.best_fit:.5g} mean {row.mean_fit:.5g} worst {row.worst_fit:.5g}"
        )
        print_progress_bar(row.generation + 1, cma_cfg["max_generations"], label="Identification")
        dist = cma_tell(dist, candidates, fitnesses, cma_cfg)

    covariance = np.zeros((len(names), len(names)))
    scale = np.diag(s)
    covariance[np.ix_(free, free)] = scale @ dist.sampling_covariance() @ scale
    covariance = (covariance + covariance.T) / 2
    phi_star = ParamDistribution(tuple(names), to_physical(dist.mean), covariance, np.asarray(phi_init.positivity, dtype=bool))
    if not trace.improving:
        log.warning(
            f"Identification did not improve: mean fitness {trace.rows[-1].mean_fit:.5g} "
            f"at the last generation vs {trace.rows[0].mean_fit:.5g} at the first one"
        )
    return phi_star, trace


# Comparison ---------------------------------------------------------------------
class CompareRow(NamedTuple):
    name: str
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    bhattacharyya: float


COMPARE_HEADER = ["name", "mean_a", "std_a", "mean_b", "std_b", "bhattacharyya"]


def bhattacharyya_coefficient(mean_a: float, std_a: float, mean_b: float, std_b: float) -> float:
    """Overlap of two 1-D Gaussians, 1.0 for identical ones."""
    if std_a == 0 and std_b == 0:
        return 1.0 if mean_a == mean_b else 0.0
    if std_a == 0 or std_b == 0:
        return 0.0
    var_sum = std_a ** 2 + std_b ** 2
    return math.sqrt(2 * std_a * std_b / var_sum) * math.exp(-((mean_a - mean_b) ** 2) / (4 * var_sum))


def compare_distributions(a: ParamDistribution, b: ParamDistribution) -> List[CompareRow]:
    if tuple(a.names) != tuple(b.names):
        raise InvalidInputError(f"Parameter names differ: {list(a.names)} vs {list(b.names)}")
    std_a, std_b = a.std(), b.std()
    return [
        CompareRow(
            name,
            float(a.mean[i]),
            float(std_a[i]),
            float(b.mean[i]),
            float(std_b[i]),
            bhattacharyya_coefficient(float(a.mean[i]), float(std_a[i]), float(b.mean[i]), float(std_b[i])),
        )
        for i, name in enumerate(a.names)
    ]


def write_compare(path: str, rows: Sequence[CompareRow]) -> None:
    write_csv(path, COMPARE_HEADER, rows)


TORQUE_COMPARE_HEADER = ["t", "real_tau1", "real_tau2", "init_tau1", "init_tau2", "opt_tau1", "opt_tau2"]


def torque_comparison(
    q_desired: np.ndarray,
    real: Trajectory,
    phi_init: DynParams,
    phi_opt: DynParams,
    world: WorldConfig,
    target_angle: Optional[float] = None,
) -> np.ndarray:
    """
    Joint torques of a reference rollout next to noise-free playbacks at the
    initial and the identified mean parameters.

    :Return: One row per time step, columns as in `TORQUE_COMPARE_HEADER`.
    """
    init = playback(q_desired, phi_init, world, target_angle=target_angle)
    opt = playback(q_desired, phi_opt, world, target_angle=target_angle)
    n = min(len(real), len(init), len(opt))
    return np.column_stack([real.times[:n], real.torque[:n], init.torque[:n], opt.torque[:n]])


def write_torque_compare(path: str, table: np.ndarray) -> None:
    write_csv(path, TORQUE_COMPARE_HEADER, table.tolist())


def reduced_grid_cost(
    q_desired: np.ndarray,
    real_set: Sequence[Trajectory],
    world: WorldConfig,
    base: DynParams,
    names: Tuple[str, str],
    grids: Tuple[Sequence[float], Sequence[float]],
    failure_penalty: float,
) -> Tuple[np.ndarray, Tuple[float, float]]:
    """
    Brute-force cost over a grid of two parameters, every other parameter at `base`.

    :Return: The cost grid (first name along rows) and the arg-min pair.
    """
    idx = [PARAM_NAMES.index(n) for n in names]
    cfg = IdentifyConfig(failure_penalty=failure_penalty, n_real=len(real_set)).validate()
    costs = np.empty((len(grids[0]), len(grids[1])))
    vector = base.to_vector()
    for i, v0 in enumerate(grids[0]):
        for j, v1 in enumerate(grids[1]):
            candidate = vector.copy()
            candidate[idx[0]], candidate[idx[1]] = v0, v1
            costs[i, j] = candidate_fitness(DynParams.from_vector(candidate), q_desired, real_set, world, cfg)
    i, j = np.unravel_index(int(np.argmin(costs)), costs.shape)
    return costs, (float(grids[0][i]), float(grids[1][j]))
