"""
Transfer evaluation on the held-out environment.
"""
from typing import Any, Dict, List, Optional, Protocol, Sequence
import math

import numpy as np

from droid import log
from droid.config import DynParams, RewardWeights, WorldConfig
from droid.errors import InvalidInputError, OutOfWorkspaceError
from droid.report import EvalReport, SUCCESS_ANGLE_DEG
from droid.rl import env_reset, env_step
from droid.simenv import check_arc_reachable
from droid.utils import derive_seed


class Controller(Protocol):
    """Anything that maps observations to joint target offsets."""

    def reset(self) -> None:
        ...

    def act(self, obs: np.ndarray) -> np.ndarray:
        ...


class StillController:
    """Never moves."""

    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray) -> np.ndarray:
        return np.zeros(2)


class DemoReplayController:
    """
    Scripted controller replaying a demonstration at the control rate,
    shifted by the joint offset observed at the first step.
    """

    def __init__(self, q_demo: np.ndarray, decimation: int) -> None:
        self.q_demo = np.asarray(q_demo, dtype=float)
        self.decimation = decimation
        self._k = 0
        self._shift: Optional[np.ndarray] = None

    def reset(self) -> None:
        self._k = 0
        self._shift = None

    def act(self, obs: np.ndarray) -> np.ndarray:
        q = np.asarray(obs[:2], dtype=float)
        if self._shift is None:
            self._shift = q - self.q_demo[0]
        index = min((self._k + 1) * self.decimation, len(self.q_demo) - 1)
        self._k += 1
        return self.q_demo[index] + self._shift - q


def run_eval_episode(
    controller: Controller,
    phi_real: DynParams,
    world: WorldConfig,
    w: RewardWeights,
    seed: int,
    horizon: int,
) -> Dict[str, Any]:
    """One rollout, returns the maximal angle and the steps to the first crossing of the success angle."""
    controller.reset()
    state, obs, phi = env_reset(phi_real, world, seed)
    max_angle = state.door_angle
    steps_to_success: Optional[int] = None
    success_angle = math.radians(SUCCESS_ANGLE_DEG)
    for t in range(horizon):
        result = env_step(state, phi, controller.act(obs), world, w, steps_taken=t, horizon=horizon)
        state, obs = result.state, result.obs
        max_angle = max(max_angle, state.door_angle)
        if steps_to_success is None and state.door_angle > success_angle:
            steps_to_success = t + 1
        if result.done:
            break
    return {"seed": int(seed), "max_angle_deg": math.degrees(max_angle), "steps_to_30": steps_to_success}


def evaluate_transfer(
    policy: Controller,
    phi_real: DynParams,
    world: WorldConfig,
    w: RewardWeights,
    episodes: int,
    base_seed: int,
    horizon: int = 512,
    method: str = "policy",
    offset: float = 0.0,
) -> EvalReport:
    """
    Deterministic rollouts on the fixed held-out parameters, seeded reset jitter.
    """
    if episodes < 1:
        raise InvalidInputError(f"episodes must be >= 1, got {episodes}")
    records = []
    for e in range(episodes):
        record = run_eval_episode(policy, phi_real, world, w, derive_seed(base_seed, e), horizon)
        record["episode"] = e
        log.debug(f"{method} episode {e}: max angle {record['max_angle_deg']:.2f} deg, steps to 30 deg {record['steps_to_30']}")
        records.append(record)
    report = EvalReport.from_episodes(method, records, offset=offset)
    log.info(
        f"{method} (offset {offset:.2f} m): success {report['success_rate'] * 100:.1f}%, "
        f"max angle {report['open_angle_mean']:.1f} +/- {report['open_angle_std']:.1f} deg"
    )
    return report


def knob_generalization(
    policy: Controller,
    phi_real: DynParams,
    world: WorldConfig,
    w: RewardWeights,
    offsets: Sequence[float],
    episodes: int,
    seed: int,
    horizon: int = 512,
    method: str = "policy",
) -> List[EvalReport]:
    """
    One report per knob offset along the lever arm, without retraining.

    :Raise OutOfWorkspaceError: If an offset moves the knob arc out of reach.
    """
    shifted = []
    for offset in offsets:
        moved = world.with_knob_offset(offset)
        if not check_arc_reachable(moved, math.pi / 2):
            raise OutOfWorkspaceError(f"Knob offset {offset} m moves the door arc out of the arm workspace")
        shifted.append((offset, moved))
    return [
        evaluate_transfer(policy, phi_real, moved, w, episodes, seed, horizon=horizon, method=method, offset=offset)
        for offset, moved in shifted
    ]
