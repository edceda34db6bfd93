"""
Covariance Matrix Adaptation Evolution Strategy.

The optimizer follows the ask / tell pattern::

    cfg = CmaConfig.for_dimension(len(x0))
    dist = cma_init(x0, 1.0, cfg)
    while not cma_converged(dist, history, cfg):
        candidates = cma_ask(dist, mask, derive_seed(cfg["seed"], dist.generation))
        fitnesses = [objective(x) for x in candidates]
        dist = cma_tell(dist, candidates, fitnesses, cfg)

Every state transition returns a new `SearchDistribution`, nothing is mutated.
"""
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple
from dataclasses import dataclass, field, replace
import json
import math

import numpy as np

from droid import log
from droid.config import Section, _getfloat, _getint, _require
from droid.errors import InfeasibleDistributionError, InvalidConfigError, InvalidInputError
from droid.utils import derive_seed, U64_MASK

MAX_REDRAWS = 1000
"Redraws allowed per sample slot before the distribution is declared infeasible."

PLATEAU_GENERATIONS = 10


class CmaConfig(Section):
    """
    CMA-ES strategy parameters.

    Use `CmaConfig.for_dimension` (or `CmaConfig.standard`) to get a config
    with the learning rates derived from the problem dimension.
    """

    DEFAULTS: Dict[str, Any] = {
        "dim": 0,
        "population": 30,
        "parents": 5,
        "max_generations": 60,
        "fitness_tolerance": 1e-3,
        "seed": 0,
        # Derived from dim / parents
        "recombination_weights": [],
        "mueff": 0.0,
        "c_sigma": 0.0,
        "d_sigma": 0.0,
        "c_c": 0.0,
        "c_1": 0.0,
        "c_mu": 0.0,
        "chi_n": 0.0,
    }

    @classmethod
    def for_dimension(
        cls,
        dim: int,
        population: int = 30,
        parents: int = 5,
        max_generations: int = 60,
        fitness_tolerance: float = 1e-3,
        seed: int = 0,
    ) -> "CmaConfig":
        """Build a config with the standard dimension-dependent learning rates."""
        if dim < 1:
            raise InvalidConfigError(f"Invalid value for key 'dim': must be >= 1, got {dim}")
        if not 1 <= parents <= population:
            raise InvalidConfigError(
                f"Invalid value for key 'parents': must be in [1, population={population}], got {parents}"
            )
        n = float(dim)
        raw = np.array([math.log(parents + 0.5) - math.log(i + 1) for i in range(parents)])
        weights = raw / raw.sum()
        mueff = float(1.0 / np.sum(weights ** 2))
        c_sigma = (mueff + 2) / (n + mueff + 5)
        d_sigma = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + c_sigma
        c_c = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        c_1 = 2 / ((n + 1.3) ** 2 + mueff)
        c_mu = min(1 - c_1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))
        return cls(
            dim=int(dim),
            population=int(population),
            parents=int(parents),
            max_generations=int(max_generations),
            fitness_tolerance=float(fitness_tolerance),
            seed=int(seed) & U64_MASK,
            recombination_weights=[float(w) for w in weights],
            mueff=mueff,
            c_sigma=c_sigma,
            d_sigma=d_sigma,
            c_c=c_c,
            c_1=c_1,
            c_mu=c_mu,
            chi_n=chi_n,
        ).validate()

    @classmethod
    def standard(cls, dim: int, **kwargs: Any) -> "CmaConfig":
        """Default population ``4 + floor(3 ln n)`` with half of it as parents."""
        population = 4 + int(math.floor(3 * math.log(dim)))
        return cls.for_dimension(dim, population=population, parents=population // 2, **kwargs)

    def validate(self, prefix: str = "cma") -> "CmaConfig":
        self.check_keys(prefix)
        for key in ("dim", "population", "parents", "max_generations", "seed"):
            self[key] = _getint(self[key], f"{prefix}.{key}")
        self["fitness_tolerance"] = _getfloat(self["fitness_tolerance"], f"{prefix}.fitness_tolerance")
        _require(1 <= self["parents"] <= self["population"], f"{prefix}.parents", "must be in [1, population]")
        weights = np.asarray(self["recombination_weights"], dtype=float)
        _require(len(weights) == self["parents"], f"{prefix}.recombination_weights", "needs one weight per parent")
        _require(bool(np.all(weights > 0)), f"{prefix}.recombination_weights", "must be positive")
        _require(bool(np.all(np.diff(weights) <= 0)), f"{prefix}.recombination_weights", "must be non-increasing")
        _require(abs(float(weights.sum()) - 1.0) <= 1e-12, f"{prefix}.recombination_weights", "must sum to 1")
        return self


@dataclass(frozen=True)
class PositivityMask:
    """
    Flags of the coordinates that must stay strictly positive.

    Feasibility may be tested through an affine map: coordinate ``i`` is
    feasible iff ``offset[i] + scale[i] * x[i] > 0``. The identity map is used
    when `offset` and `scale` are omitted.
    """

    flags: np.ndarray
    offset: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    @classmethod
    def all_positive(cls, dim: int) -> "PositivityMask":
        return cls(np.ones(dim, dtype=bool))

    @classmethod
    def none(cls, dim: int) -> "PositivityMask":
        return cls(np.zeros(dim, dtype=bool))

    @property
    def dim(self) -> int:
        return int(len(self.flags))

    def feasible(self, x: np.ndarray) -> bool:
        flags = np.asarray(self.flags, dtype=bool)
        if not flags.any():
            return True
        offset = np.zeros(len(x)) if self.offset is None else np.asarray(self.offset, dtype=float)
        scale = np.ones(len(x)) if self.scale is None else np.asarray(self.scale, dtype=float)
        values = offset[flags] + scale[flags] * np.asarray(x, dtype=float)[flags]
        return bool(np.all(values > 0))


@dataclass(frozen=True)
class SearchDistribution:
    """
    Gaussian search distribution ``N(mean, step_size**2 * covariance)`` and
    the CMA-ES evolution paths.
    """

    mean: np.ndarray
    covariance: np.ndarray
    step_size: float
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int = 0
    population: int = 30
    names: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return int(len(self.mean))

    def sampling_covariance(self) -> np.ndarray:
        """Effective covariance of the samples, ``step_size**2 * covariance``."""
        return self.step_size ** 2 * self.covariance

    def to_json(self) -> Dict[str, Any]:
        return {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "step_size": float(self.step_size),
            "generation": int(self.generation),
            "population": int(self.population),
            "path_sigma": [float(v) for v in self.path_sigma],
            "path_cov": [float(v) for v in self.path_cov],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SearchDistribution":
        try:
            mean = np.array(data["mean"], dtype=float)
            dim = len(mean)
            return cls(
                mean=mean,
                covariance=np.array(data["covariance"], dtype=float).reshape(dim, dim),
                step_size=float(data["step_size"]),
                path_sigma=np.array(data.get("path_sigma", [0.0] * dim), dtype=float),
                path_cov=np.array(data.get("path_cov", [0.0] * dim), dtype=float),
                generation=int(data["generation"]),
                population=int(data.get("population", 30)),
                names=tuple(data.get("names", [])),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise InvalidInputError(f"Malformed search distribution document: {err}") from err

    def save(self, path: str) -> None:
        with open(path, "w") as fp:
            json.dump(self.to_json(), fp, indent=2)

    @classmethod
    def load(cls, path: str) -> "SearchDistribution":
        with open(path, "r") as fp:
            return cls.from_json(json.load(fp))


def sample_masked(
    mean: np.ndarray,
    covariance: np.ndarray,
    mask: PositivityMask,
    rng: np.random.Generator,
    count: int,
) -> List[np.ndarray]:
    """
    Draw `count` vectors from ``N(mean, covariance)``, discarding and redrawing
    the ones the mask rejects.

    :Raise InfeasibleDistributionError: If a slot needs more than `MAX_REDRAWS` redraws.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if mask.dim != len(mean):
        raise InvalidInputError(f"Mask has {mask.dim} flags for a {len(mean)}-dimensional distribution")
    eigenvalues, basis = np.linalg.eigh((cov + cov.T) / 2)
    scales = np.sqrt(np.maximum(eigenvalues, 0.0))
    samples: List[np.ndarray] = []
    for slot in range(count):
        for _ in range(MAX_REDRAWS + 1):
            x = mean + basis @ (scales * rng.standard_normal(len(mean)))
            if mask.feasible(x):
                samples.append(x)
                break
        else:
            raise InfeasibleDistributionError(
                f"Could not draw a feasible sample for slot {slot} after {MAX_REDRAWS} redraws, "
                "the distribution has drifted out of the positive region"
            )
    return samples


def _symmetrize_psd(cov: np.ndarray) -> np.ndarray:
    cov = (cov + cov.T) / 2
    eigenvalues, basis = np.linalg.eigh(cov)
    if eigenvalues.min() < 0:
        cov = (basis * np.maximum(eigenvalues, 0.0)) @ basis.T
        cov = (cov + cov.T) / 2
    return cov


def cma_init(
    mean0: Sequence[float], sigma0: float, cfg: CmaConfig, names: Sequence[str] = ()
) -> SearchDistribution:
    """Initial distribution: identity covariance, zeroed paths, generation 0."""
    mean = np.array(mean0, dtype=float)
    if mean.ndim != 1 or len(mean) == 0 or not np.all(np.isfinite(mean)):
        raise InvalidConfigError(f"Initial mean must be a non-empty finite vector, got {list(mean0)}")
    if not (math.isfinite(sigma0) and sigma0 > 0):
        raise InvalidConfigError(f"Initial step size must be > 0, got {sigma0}")
    dim = len(mean)
    return SearchDistribution(
        mean=mean,
        covariance=np.eye(dim),
        step_size=float(sigma0),
        path_sigma=np.zeros(dim),
        path_cov=np.zeros(dim),
        generation=0,
        population=int(cfg["population"]),
        names=tuple(names),
    )


def cma_ask(
    dist: SearchDistribution, mask: PositivityMask, rng_seed: int, population: Optional[int] = None
) -> List[np.ndarray]:
    """Sample one population. Deterministic in ``(dist, mask, rng_seed)``."""
    rng = np.random.default_rng(int(rng_seed) & U64_MASK)
    return sample_masked(
        dist.mean, dist.sampling_covariance(), mask, rng, dist.population if population is None else population
    )


def cma_tell(
    dist: SearchDistribution,
    candidates: Sequence[Sequence[float]],
    fitnesses: Sequence[float],
    cfg: CmaConfig,
) -> SearchDistribution:
    """
    Update mean, evolution paths, step size and covariance from one
    evaluated population. Lower fitness is better.

    :Raise InvalidInputError: If the candidate or fitness count is not the
                              configured population, or a fitness is not finite.
    """
    arx = np.array(candidates, dtype=float)
    fit = np.array(fitnesses, dtype=float)
    if arx.ndim != 2 or arx.shape[1] != dist.dim:
        raise InvalidInputError(f"Candidates must be vectors of dimension {dist.dim}")
    if len(arx) != cfg["population"] or len(fit) != cfg["population"]:
        raise InvalidInputError(
            f"Got {len(arx)} candidates and {len(fit)} fitnesses, expected a population of {cfg['population']}"
        )
    if not np.all(np.isfinite(fit)):
        raise InvalidInputError("Fitnesses must be finite")

    n = dist.dim
    weights = np.asarray(cfg["recombination_weights"], dtype=float)
    mueff, cs, ds, cc, c1, cmu, chi_n = (
        cfg["mueff"], cfg["c_sigma"], cfg["d_sigma"], cfg["c_c"], cfg["c_1"], cfg["c_mu"], cfg["chi_n"],
    )
    sigma = dist.step_size
    xold = dist.mean

    # Rank based selection
    order = np.argsort(fit, kind="stable")[: cfg["parents"]]
    selected = arx[order]
    mean = weights @ selected

    eigenvalues, basis = np.linalg.eigh(dist.covariance)
    inv_sqrt = (basis / np.sqrt(np.maximum(eigenvalues, 1e-300))) @ basis.T

    step = (mean - xold) / sigma
    path_sigma = (1 - cs) * dist.path_sigma + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ step)
    norm_ps = float(np.linalg.norm(path_sigma))
    hsig = norm_ps / math.sqrt(1 - (1 - cs) ** (2 * (dist.generation + 1))) / chi_n < 1.4 + 2 / (n + 1)
    path_cov = (1 - cc) * dist.path_cov + float(hsig) * math.sqrt(cc * (2 - cc) * mueff) * step

    y = (selected - xold) / sigma
    rank_mu = (y.T * weights) @ y
    covariance = (
        (1 - c1 - cmu) * dist.covariance
        + c1 * (np.outer(path_cov, path_cov) + (1 - float(hsig)) * cc * (2 - cc) * dist.covariance)
        + cmu * rank_mu
    )
    covariance = _symmetrize_psd(covariance)
    step_size = sigma * math.exp(min(1.0, (cs / ds) * (norm_ps / chi_n - 1)))

    return replace(
        dist,
        mean=mean,
        covariance=covariance,
        step_size=step_size,
        path_sigma=path_sigma,
        path_cov=path_cov,
        generation=dist.generation + 1,
    )


def cma_converged(dist: SearchDistribution, fitness_history: Sequence[float], cfg: CmaConfig) -> bool:
    """
    True when the generation cap is reached, or when the best fitness
    improved by less than ``fitness_tolerance`` over the last 10 generations.

    `fitness_history` holds the best fitness of each generation. A zero
    tolerance disables the plateau test.
    """
    if dist.generation >= cfg["max_generations"]:
        return True
    history = np.asarray(fitness_history, dtype=float)
    if cfg["fitness_tolerance"] <= 0 or len(history) < PLATEAU_GENERATIONS:
        return False
    best_so_far = np.minimum.accumulate(history)
    return bool(best_so_far[-PLATEAU_GENERATIONS] - best_so_far[-1] < cfg["fitness_tolerance"])


class FminResult(NamedTuple):
    best: np.ndarray
    best_fitness: float
    evaluations: int
    distribution: SearchDistribution
    history: List[float]


def fmin(
    objective: Callable[[np.ndarray], float],
    mean0: Sequence[float],
    sigma0: float,
    cfg: Optional[CmaConfig] = None,
    mask: Optional[PositivityMask] = None,
    max_evaluations: Optional[int] = None,
    target: Optional[float] = None,
) -> FminResult:
    """
    Minimize `objective` from `mean0`.

    Stops when `max_evaluations` is spent, when the best fitness reaches
    `target`, or, when no evaluation budget is given, when `cma_converged`.
    """
    cfg = cfg or CmaConfig.standard(len(mean0))
    mask = mask or PositivityMask.none(len(mean0))
    dist = cma_init(mean0, sigma0, cfg)
    best = np.array(mean0, dtype=float)
    best_fitness = math.inf
    evaluations = 0
    history: List[float] = []
    while True:
        candidates = cma_ask(dist, mask, derive_seed(cfg["seed"], dist.generation))
        fitnesses = [float(objective(x)) for x in candidates]
        evaluations += len(fitnesses)
        k = int(np.argmin(fitnesses))
        if fitnesses[k] < best_fitness:
            best, best_fitness = candidates[k], fitnesses[k]
        history.append(min(fitnesses))
        dist = cma_tell(dist, candidates, fitnesses, cfg)
        log.debug(f"CMA-ES generation {dist.generation}: best {best_fitness:.6g}, sigma {dist.step_size:.3g}")
        if target is not None and best_fitness <= target:
            break
        if max_evaluations is not None:
            if evaluations + dist.population > max_evaluations:
                break
        elif cma_converged(dist, history, cfg):
            break
    return FminResult(best, best_fitness, evaluations, dist, history)
