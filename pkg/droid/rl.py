"""
Door-opening MDP and from-scratch actor-critic PPO.

The environment is functional: `env_reset` and `env_step` take and return
`SimState` values. Dynamics parameters are drawn per episode from a
`ParamDistribution` (domain randomization) or fixed.
"""
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
import copy
import json
import math

import numpy as np
import torch
import torch.nn as nn

from droid import log
from droid.config import DynParams, PpoConfig, RewardWeights, WorldConfig
from droid.errors import DivergedUpdateError, InvalidInputError, SimulationDivergedError
from droid.identify import ParamDistribution
from droid.simenv import SimState, advance, physics_model, forward_kinematics, grasp_pose, initial_state, knob_position
from droid.utils import derive_seed, print_progress_bar, U64_MASK, write_csv

OBS_DIM = 8
ACT_DIM = 2
HIDDEN = (64, 64)
ACTION_LIMIT = 0.05
"Largest joint target offset per control step (rad)."
OPEN_ANGLE = math.radians(85.0)
SUCCESS_ANGLE = math.radians(30.0)
LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_DIST_EPS = 1e-4
SLIP_MARGIN = 0.8
RATIO_IDENTITY_TOL = 1e-6
CURVE_HEADER = ["update", "mean_return", "success_rate", "clip_frac"]

DynSource = Union[ParamDistribution, DynParams]


# Environment -------------------------------------------------------------------
class StepResult(NamedTuple):
    state: SimState
    obs: np.ndarray
    reward: float
    done: bool
    coupling_force: float
    terminal: bool
    "True when the episode ended in a terminal state (not a horizon cut)."


def observe(state: SimState, world: WorldConfig) -> np.ndarray:
    """Joint positions and velocities, knob minus gripper position, door angle and rate."""
    position, _ = forward_kinematics(state.q, world)
    rel = knob_position(state.door_angle, world) - position
    return np.array(
        [state.q[0], state.q[1], state.qdot[0], state.qdot[1], rel[0], rel[1], state.door_angle, state.door_rate]
    )


def reward(
    prev: SimState,
    curr: SimState,
    coupling_force: float,
    world: WorldConfig,
    w: RewardWeights,
    phi: DynParams,
) -> float:
    """
    Door progress, gripper orientation, distance, log distance and slip terms.
    The two distance terms only apply while the door is below the switch angle.
    """
    r_door = curr.door_angle - prev.door_angle
    position, heading = forward_kinematics(curr.q, world)
    lam = curr.door_angle
    tangent = math.atan2(-math.cos(lam), math.sin(lam))
    r_ori = -abs(math.cos(heading - tangent))
    d = float(np.linalg.norm(knob_position(lam, world) - position))
    r_dist = -d
    r_log_dist = -math.log(d + LOG_DIST_EPS)
    threshold = max(phi["slide_friction"] * world["grip_force"], 1e-6)
    r_slip = -max(0.0, coupling_force / threshold - SLIP_MARGIN)
    total = w["w_door"] * r_door + w["w_ori"] * r_ori + w["w_slip"] * r_slip
    if curr.door_angle < w["switch_angle"]:
        total += w["w_dist"] * r_dist + w["w_log_dist"] * r_log_dist
    return total


def env_reset(
    source: DynSource, world: WorldConfig, seed: int, elbow_sign: Optional[int] = None
) -> Tuple[SimState, np.ndarray, DynParams]:
    """
    Start an episode: draw the parameters, put the arm at the grasp pose of
    the closed door with a uniform joint jitter and take the grasp.

    :Raise InfeasibleDistributionError: If positivity can not be met while sampling.
    """
    rng = np.random.default_rng(int(seed) & U64_MASK)
    if isinstance(source, ParamDistribution):
        phi = source.sample(rng)
    else:
        phi = DynParams(copy.deepcopy(dict(source)))
    jitter = world["reset_jitter"]
    q0 = grasp_pose(world, elbow_sign) + rng.uniform(-jitter, jitter, size=2)
    state = initial_state(q0, world)
    return state, observe(state, world), phi


def env_step(
    state: SimState,
    phi: DynParams,
    action: Sequence[float],
    world: WorldConfig,
    w: RewardWeights,
    steps_taken: int = 0,
    horizon: Optional[int] = None,
) -> StepResult:
    """
    Hold ``q + clip(action)`` for ``control_decimation`` physics steps.

    `steps_taken` is the number of control steps already done in the episode,
    the episode is cut when it reaches `horizon`.
    """
    a = np.clip(np.asarray(action, dtype=float), -ACTION_LIMIT, ACTION_LIMIT)
    target0, target1 = state.q[0] + float(a[0]), state.q[1] + float(a[1])
    model = physics_model(phi, world)
    curr = state
    peak_force = 0.0
    try:
        for _ in range(world["control_decimation"]):
            curr, _, force = advance(model, curr, target0, target1, 0.0, 0.0)
            peak_force = max(peak_force, force)
            if not curr.grasped:
                break
    except SimulationDivergedError as err:
        log.debug(f"Episode terminated: {err}")
        return StepResult(state, observe(state, world), -w["terminal_penalty"], True, peak_force, True)

    r = reward(state, curr, peak_force, world, w, phi)
    terminal = False
    if not curr.grasped:
        r -= w["terminal_penalty"]
        terminal = True
    elif curr.door_angle >= OPEN_ANGLE:
        terminal = True
    truncated = horizon is not None and steps_taken + 1 >= horizon
    return StepResult(curr, observe(curr, world), r, terminal or truncated, peak_force, terminal)


# Policy --------------------------------------------------------------------------
def _mlp(widths: Sequence[int], out_gain: float) -> nn.Sequential:
    layers: List[nn.Module] = []
    for i in range(len(widths) - 1):
        linear = nn.Linear(widths[i], widths[i + 1])
        last = i == len(widths) - 2
        nn.init.orthogonal_(linear.weight, gain=out_gain if last else 1.0)
        nn.init.zeros_(linear.bias)
        layers.append(linear)
        if not last:
            layers.append(nn.Tanh())
    return nn.Sequential(*layers)


class PolicyNet(nn.Module):
    """
    Gaussian MLP actor with a state-independent log standard deviation, MLP
    critic and a running observation normaliser. Everything is float64.
    """

    obs_mean: torch.Tensor
    obs_var: torch.Tensor
    obs_count: torch.Tensor

    def __init__(self, seed: int = 0, obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM) -> None:
        super().__init__()
        with torch.random.fork_rng():
            torch.manual_seed(int(seed) & 0x7FFF_FFFF_FFFF_FFFF)
            self.actor = _mlp((obs_dim,) + HIDDEN + (act_dim,), out_gain=0.01).double()
            self.critic = _mlp((obs_dim,) + HIDDEN + (1,), out_gain=1.0).double()
        self.log_std = nn.Parameter(torch.full((act_dim,), -0.5, dtype=torch.float64))
        self.register_buffer("obs_mean", torch.zeros(obs_dim, dtype=torch.float64))
        self.register_buffer("obs_var", torch.ones(obs_dim, dtype=torch.float64))
        self.register_buffer("obs_count", torch.tensor(1e-4, dtype=torch.float64))
        self.optimizer_state: Optional[Dict[str, Any]] = None
        "Adam state carried from one network version to the next."

    def normalize(self, obs: torch.Tensor) -> torch.Tensor:
        return torch.clamp((obs - self.obs_mean) / torch.sqrt(self.obs_var + 1e-8), -10.0, 10.0)

    def forward(self, obs: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        x = self.normalize(obs)
        mean = self.actor(x)
        log_std = torch.clamp(self.log_std, LOG_STD_MIN, LOG_STD_MAX).expand_as(mean)
        value = self.critic(x).squeeze(-1)
        return mean, log_std, value

    @torch.no_grad()
    def update_normalizer(self, batch: np.ndarray) -> None:
        """Merge the moments of `batch` into the running mean and variance."""
        x = torch.as_tensor(batch, dtype=torch.float64)
        count = float(x.shape[0])
        if count == 0:
            return
        mean, var = x.mean(0), x.var(0, unbiased=False)
        total = self.obs_count + count
        delta = mean - self.obs_mean
        m2 = self.obs_var * self.obs_count + var * count + delta ** 2 * self.obs_count * count / total
        self.obs_mean.copy_(self.obs_mean + delta * count / total)
        self.obs_var.copy_(m2 / total)
        self.obs_count.copy_(total)

    # Controller protocol
    def reset(self) -> None:
        pass

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic action: the mean of the Gaussian head."""
        mean, _, _ = policy_eval(self, obs)
        return mean

    # Serialization
    def to_json(self) -> Dict[str, Any]:
        def layers(seq: nn.Sequential) -> List[Dict[str, Any]]:
            return [
                {"weight": m.weight.detach().tolist(), "bias": m.bias.detach().tolist()}
                for m in seq
                if isinstance(m, nn.Linear)
            ]

        return {
            "actor_widths": [OBS_DIM, *HIDDEN, ACT_DIM],
            "critic_widths": [OBS_DIM, *HIDDEN, 1],
            "actor": layers(self.actor),
            "critic": layers(self.critic),
            "log_std": self.log_std.detach().tolist(),
            "obs_mean": self.obs_mean.tolist(),
            "obs_var": self.obs_var.tolist(),
            "obs_count": float(self.obs_count),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "PolicyNet":
        net = cls()
        try:
            with torch.no_grad():
                for seq, key in ((net.actor, "actor"), (net.critic, "critic")):
                    linears = [m for m in seq if isinstance(m, nn.Linear)]
                    if len(linears) != len(data[key]):
                        raise InvalidInputError(f"Policy document has {len(data[key])} {key} layers, expected {len(linears)}")
                    for m, layer in zip(linears, data[key]):
                        m.weight.copy_(torch.tensor(layer["weight"], dtype=torch.float64))
                        m.bias.copy_(torch.tensor(layer["bias"], dtype=torch.float64))
                net.log_std.copy_(torch.tensor(data["log_std"], dtype=torch.float64))
                net.obs_mean.copy_(torch.tensor(data["obs_mean"], dtype=torch.float64))
                net.obs_var.copy_(torch.tensor(data["obs_var"], dtype=torch.float64))
                net.obs_count.fill_(float(data["obs_count"]))
        except (KeyError, TypeError, RuntimeError) as err:
            raise InvalidInputError(f"Malformed policy document: {err}") from err
        return net

    def save(self, path: str) -> None:
        with open(path, "w") as fp:
            json.dump(self.to_json(), fp)

    @classmethod
    def load(cls, path: str) -> "PolicyNet":
        with open(path, "r") as fp:
            return cls.from_json(json.load(fp))


@torch.no_grad()
def policy_eval(net: PolicyNet, obs: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, float]:
    """Action mean, log standard deviation and state value."""
    mean, log_std, value = net(torch.as_tensor(np.asarray(obs, dtype=float), dtype=torch.float64))
    return mean.numpy().copy(), log_std.numpy().copy(), float(value)


def log_prob(mean: Any, log_std: Any, action: Any) -> torch.Tensor:
    """Diagonal Gaussian log-density, summed over the last axis."""
    mean = torch.as_tensor(mean, dtype=torch.float64)
    log_std = torch.as_tensor(log_std, dtype=torch.float64)
    action = torch.as_tensor(action, dtype=torch.float64)
    z = (action - mean) / torch.exp(log_std)
    k = mean.shape[-1]
    return -0.5 * (z ** 2).sum(-1) - log_std.sum(-1) - 0.5 * k * math.log(2 * math.pi)


def gae(
    rewards: Sequence[float], values: Sequence[float], terminal_value: float, gamma: float, gae_lambda: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and returns (advantages + values)."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape:
        raise InvalidInputError(f"rewards and values differ in length: {len(rewards)} vs {len(values)}")
    next_values = np.append(values[1:], terminal_value)
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in reversed(range(len(rewards))):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        running = delta + gamma * gae_lambda * running
        advantages[t] = running
    return advantages, advantages + values


# PPO -----------------------------------------------------------------------------
class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def clipped_surrogate(ratio: torch.Tensor, advantages: torch.Tensor, clip: float) -> torch.Tensor:
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)``."""
    return torch.min(ratio * advantages, torch.clamp(ratio, 1 - clip, 1 + clip) * advantages)


def ppo_loss(
    net: PolicyNet,
    obs: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    cfg: PpoConfig,
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    """Negated surrogate plus weighted value error minus weighted entropy."""
    mean, log_std, value = net(obs)
    ratio = torch.exp(log_prob(mean, log_std, actions) - old_log_probs)
    surrogate = clipped_surrogate(ratio, advantages, cfg["clip"]).mean()
    value_loss = ((value - returns) ** 2).mean()
    entropy = (log_std + 0.5 * math.log(2 * math.pi * math.e)).sum(-1).mean()
    loss = -surrogate + cfg["value_coef"] * value_loss - cfg["entropy_coef"] * entropy
    parts = {
        "ratio": ratio.detach(),
        "policy_loss": -surrogate.detach(),
        "value_loss": value_loss.detach(),
        "entropy": entropy.detach(),
    }
    return loss, parts


def ppo_update(net: PolicyNet, batch: Batch, cfg: PpoConfig, seed: int = 0) -> Tuple[PolicyNet, Dict[str, float]]:
    """
    Run ``epochs_per_update`` passes of shuffled minibatch Adam steps on a
    copy of `net`. Advantages are normalized within the batch.

    :Raise DivergedUpdateError: If the loss is not finite or the probability
                                ratio of the old policy is not 1.
    """
    size = len(batch.obs)
    if size == 0:
        raise InvalidInputError("Empty PPO batch")
    new = copy.deepcopy(net)
    optimizer = torch.optim.Adam(new.parameters(), lr=cfg["learn_rate"])
    if net.optimizer_state is not None:
        optimizer.load_state_dict(copy.deepcopy(net.optimizer_state))

    obs = torch.as_tensor(batch.obs, dtype=torch.float64)
    actions = torch.as_tensor(batch.actions, dtype=torch.float64)
    old_log_probs = torch.as_tensor(batch.old_log_probs, dtype=torch.float64)
    adv = np.asarray(batch.advantages, dtype=float)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    advantages = torch.as_tensor(adv, dtype=torch.float64)
    returns = torch.as_tensor(batch.returns, dtype=torch.float64)

    rng = np.random.default_rng(int(seed) & U64_MASK)
    ratios: List[float] = []
    clipped: List[float] = []
    losses: Dict[str, List[float]] = {"policy_loss": [], "value_loss": [], "entropy": []}
    first = True
    for _ in range(cfg["epochs_per_update"]):
        order = rng.permutation(size)
        for start in range(0, size, cfg["minibatch"]):
            idx = torch.as_tensor(order[start : start + cfg["minibatch"]])
            loss, parts = ppo_loss(
                new, obs[idx], actions[idx], old_log_probs[idx], advantages[idx], returns[idx], cfg
            )
            if first:
                deviation = float(torch.max(torch.abs(parts["ratio"] - 1.0)))
                if deviation > RATIO_IDENTITY_TOL:
                    raise DivergedUpdateError(
                        f"Probability ratio of the collecting policy deviates from 1 by {deviation:.3g}"
                    )
                first = False
            if not torch.isfinite(loss):
                raise DivergedUpdateError(f"Non-finite PPO loss: {float(loss)}")
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(new.parameters(), cfg["max_grad_norm"])
            optimizer.step()
            ratios.extend(parts["ratio"].tolist())
            clipped.extend((torch.abs(parts["ratio"] - 1.0) > cfg["clip"]).double().tolist())
            for key in losses:
                losses[key].append(float(parts[key]))

    new.optimizer_state = copy.deepcopy(optimizer.state_dict())
    diagnostics = {
        "mean_ratio": float(np.mean(ratios)) if ratios else 1.0,
        "clip_frac": float(np.mean(clipped)) if clipped else 0.0,
    }
    diagnostics.update({k: float(np.mean(v)) if v else 0.0 for k, v in losses.items()})
    return new, diagnostics


# Training ------------------------------------------------------------------------
class CurveRow(NamedTuple):
    update: int
    mean_return: float
    success_rate: float
    clip_frac: float


class Episode(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    total_reward: float
    max_angle: float


def run_episode(
    net: PolicyNet,
    source: DynSource,
    world: WorldConfig,
    w: RewardWeights,
    cfg: PpoConfig,
    seed: int,
) -> Episode:
    """Collect one stochastic episode and its advantage estimates."""
    state, obs, phi = env_reset(source, world, seed)
    rng = np.random.default_rng(derive_seed(seed, 1))
    observations, actions, log_probs, rewards, values = [], [], [], [], []
    max_angle = state.door_angle
    terminal = False
    for t in range(cfg["horizon"]):
        mean, log_std, value = policy_eval(net, obs)
        action = mean + np.exp(log_std) * rng.standard_normal(ACT_DIM)
        observations.append(obs)
        actions.append(action)
        log_probs.append(float(log_prob(mean, log_std, action)))
        values.append(value)
        result = env_step(state, phi, action, world, w, steps_taken=t, horizon=cfg["horizon"])
        rewards.append(result.reward)
        state, obs = result.state, result.obs
        max_angle = max(max_angle, state.door_angle)
        if result.done:
            terminal = result.terminal
            break
    terminal_value = 0.0 if terminal else policy_eval(net, obs)[2]
    advantages, returns = gae(rewards, values, terminal_value, cfg["discount"], cfg["gae_lambda"])
    return Episode(
        np.array(observations),
        np.array(actions),
        np.array(log_probs),
        advantages,
        returns,
        float(np.sum(rewards)),
        float(max_angle),
    )


def train_policy(
    source: DynSource, world: WorldConfig, w: RewardWeights, cfg: PpoConfig
) -> Tuple[PolicyNet, List[CurveRow]]:
    """
    Alternate episode collection (fresh parameters at every reset) and PPO
    updates for ``total_updates`` rounds.
    """
    seed = cfg["seed"]
    net = PolicyNet(seed=seed)
    curve: List[CurveRow] = []
    for update in range(cfg["total_updates"]):
        episodes = [
            run_episode(net, source, world, w, cfg, derive_seed(seed, update, e))
            for e in range(cfg["rollout_episodes_per_update"])
        ]
        batch = Batch(
            np.concatenate([e.obs for e in episodes]),
            np.concatenate([e.actions for e in episodes]),
            np.concatenate([e.log_probs for e in episodes]),
            np.concatenate([e.advantages for e in episodes]),
            np.concatenate([e.returns for e in episodes]),
        )
        net, diagnostics = ppo_update(net, batch, cfg, seed=derive_seed(seed, update, 2 ** 32))
        net.update_normalizer(batch.obs)
        row = CurveRow(
            update + 1,
            float(np.mean([e.total_reward for e in episodes])),
            float(np.mean([e.max_angle > SUCCESS_ANGLE for e in episodes])),
            diagnostics["clip_frac"],
        )
        curve.append(row)
        log.info(
            f"Update {row.update}/{cfg['total_updates']}: return {row.mean_return:.3f} "
            f"success {row.success_rate:.2f} clip {row.clip_frac:.3f} ratio {diagnostics['mean_ratio']:.4f}"
        )
        print_progress_bar(row.update, cfg["total_updates"], label="Training")
    return net, curve


def write_curve(path: str, curve: Sequence[CurveRow]) -> None:
    write_csv(path, CURVE_HEADER, curve)
