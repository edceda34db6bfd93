"""
Planar 2-link arm holding the knob of a 1-DoF hinged door.

The arm base is at the origin and moves in a horizontal plane (no gravity).
Both links are point masses at the link tips. The gripper is coupled to the
knob by a spring-damper; the grasp slips for good when the coupling force
exceeds ``slide_friction * grip_force``.

The same simulator serves as the hidden "real" system (ground truth
parameters and torque sensor noise) and as the candidate simulator.
"""
from typing import List, NamedTuple, Optional, Sequence, Tuple
from dataclasses import dataclass
import json
import math
import os

import numpy as np

from droid import log
from droid.config import DynParams, WorldConfig
from droid.errors import InvalidInputError, OutOfWorkspaceError, SimulationDivergedError
from droid.utils import read_csv, sha256_json, U64_MASK, write_csv

DOOR_ANGLE_MIN = -0.1
DOOR_ANGLE_MAX = math.pi / 2 + 0.1
FRICTION_SMOOTHING = 0.01
"Velocity scale of the ``tanh`` used for Coulomb friction (rad/s)."
IK_TOLERANCE = 1e-12
TRAJECTORY_HEADER = ["t", "qd1", "qd2", "q1", "q2", "tau1", "tau2", "lambda"]


class SimState(NamedTuple):
    """Arm + door state. Tuples of floats so stepping stays cheap."""

    q: Tuple[float, float]
    qdot: Tuple[float, float]
    door_angle: float
    door_rate: float
    grasped: bool
    time: float
    grasp_offset: Tuple[float, float] = (0.0, 0.0)
    "Knob position minus gripper position when the grasp was taken."


@dataclass
class Trajectory:
    """Time-stamped playback record. All arrays have the same length."""

    dt: float
    q_desired: np.ndarray
    q_actual: np.ndarray
    torque: np.ndarray
    door_angle: np.ndarray
    failed: bool
    seed: Optional[int] = None
    world_hash: str = ""
    params_hash: str = ""

    def __len__(self) -> int:
        return int(len(self.door_angle))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, len(self) + 1)

    def save(self, path: str) -> None:
        """Write the CSV at `path` and the JSON sidecar next to it."""
        rows = zip(
            self.times,
            self.q_desired[:, 0], self.q_desired[:, 1],
            self.q_actual[:, 0], self.q_actual[:, 1],
            self.torque[:, 0], self.torque[:, 1],
            self.door_angle,
        )
        write_csv(path, TRAJECTORY_HEADER, rows)
        sidecar = {
            "dt": float(self.dt),
            "failed": bool(self.failed),
            "seed": self.seed,
            "world_hash": self.world_hash,
            "params_hash": self.params_hash,
        }
        with open(sidecar_path(path), "w") as fp:
            json.dump(sidecar, fp, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "Trajectory":
        rows = read_csv(path)
        if not rows or rows[0] != TRAJECTORY_HEADER:
            raise InvalidInputError(f"{path} is not a trajectory file, header must be {','.join(TRAJECTORY_HEADER)}")
        try:
            data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, 8)
            with open(sidecar_path(path), "r") as fp:
                meta = json.load(fp)
        except (ValueError, OSError) as err:
            raise InvalidInputError(f"Could not read trajectory {path}: {err}") from err
        return cls(
            dt=float(meta["dt"]),
            q_desired=data[:, 1:3].copy(),
            q_actual=data[:, 3:5].copy(),
            torque=data[:, 5:7].copy(),
            door_angle=data[:, 7].copy(),
            failed=bool(meta["failed"]),
            seed=meta.get("seed"),
            world_hash=meta.get("world_hash", ""),
            params_hash=meta.get("params_hash", ""),
        )


def sidecar_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".json"


# Kinematics -----------------------------------------------------------------
def forward_kinematics(q: Sequence[float], world: WorldConfig) -> Tuple[np.ndarray, float]:
    """Gripper position and heading ``q1 + q2``."""
    l1, l2 = world["link_lengths"]
    q1, q2 = float(q[0]), float(q[1])
    position = np.array(
        [l1 * math.cos(q1) + l2 * math.cos(q1 + q2), l1 * math.sin(q1) + l2 * math.sin(q1 + q2)]
    )
    return position, q1 + q2


def jacobian(q: Sequence[float], world: WorldConfig) -> np.ndarray:
    l1, l2 = world["link_lengths"]
    q1, q2 = float(q[0]), float(q[1])
    s1, c1 = math.sin(q1), math.cos(q1)
    s12, c12 = math.sin(q1 + q2), math.cos(q1 + q2)
    return np.array([[-l1 * s1 - l2 * s12, -l2 * s12], [l1 * c1 + l2 * c12, l2 * c12]])


def inverse_kinematics(target: Sequence[float], elbow_sign: int, world: WorldConfig) -> np.ndarray:
    """
    Joint angles reaching `target`. `elbow_sign` (+1 / -1) picks the branch.

    :Raise OutOfWorkspaceError: If the target is outside the reachable annulus.
    """
    l1, l2 = world["link_lengths"]
    x, y = float(target[0]), float(target[1])
    cos_q2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if not math.isfinite(cos_q2) or abs(cos_q2) > 1 + IK_TOLERANCE:
        raise OutOfWorkspaceError(
            f"Target ({x:.4f}, {y:.4f}) is out of the arm workspace, reach is [{abs(l1 - l2)}, {l1 + l2}] m"
        )
    cos_q2 = max(-1.0, min(1.0, cos_q2))
    q2 = math.atan2(elbow_sign * math.sqrt(1 - cos_q2 * cos_q2), cos_q2)
    q1 = math.atan2(y, x) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    return np.array([q1, q2])


# Door geometry -----------------------------------------------------------------
def knob_position(angle: float, world: WorldConfig) -> np.ndarray:
    hx, hy = world["hinge_position"]
    r = world["knob_radius"]
    return np.array([hx - r * math.cos(angle), hy - r * math.sin(angle)])


def knob_angle_of(position: Sequence[float], world: WorldConfig) -> float:
    """Door angle whose knob is closest to `position`."""
    hx, hy = world["hinge_position"]
    return math.atan2(-(float(position[1]) - hy), -(float(position[0]) - hx))


def door_inertia(phi: DynParams, world: WorldConfig) -> float:
    r = world["knob_radius"]
    return phi["door_mass"] * r * r / 3 + phi["knob_mass"] * r * r


def mass_matrix(q: Sequence[float], world: WorldConfig) -> np.ndarray:
    l1, l2 = world["link_lengths"]
    m1, m2 = world["link_masses"]
    c2 = math.cos(float(q[1]))
    m11 = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2 * l1 * l2 * c2)
    m12 = m2 * (l2 * l2 + l1 * l2 * c2)
    return np.array([[m11, m12], [m12, m2 * l2 * l2]])


def kinetic_energy(state: SimState, phi: DynParams, world: WorldConfig) -> float:
    """Arm plus door kinetic energy (J)."""
    qdot = np.array(state.qdot)
    arm = 0.5 * float(qdot @ mass_matrix(state.q, world) @ qdot)
    return arm + 0.5 * door_inertia(phi, world) * state.door_rate ** 2


def check_arc_reachable(world: WorldConfig, max_angle: float, samples: int = 91) -> bool:
    """True if the knob stays inside the arm workspace while the door swings 0 -> `max_angle`."""
    l1, l2 = world["link_lengths"]
    for angle in np.linspace(0.0, max_angle, samples):
        distance = float(np.linalg.norm(knob_position(float(angle), world)))
        if not abs(l1 - l2) <= distance <= l1 + l2:
            return False
    return True


# Dynamics ------------------------------------------------------------------------
class PhysicsModel(NamedTuple):
    l1: float
    l2: float
    m1: float
    m2: float
    hx: float
    hy: float
    r: float
    kp1: float
    kp2: float
    kd1: float
    kd2: float
    slip_force: float
    k: float
    c: float
    dt: float
    inertia: float
    friction_loss: float
    stiffness: float
    damping: float
    d1: float
    d2: float


def physics_model(phi: DynParams, world: WorldConfig) -> PhysicsModel:
    return PhysicsModel(
        l1=world["link_lengths"][0],
        l2=world["link_lengths"][1],
        m1=world["link_masses"][0],
        m2=world["link_masses"][1],
        hx=world["hinge_position"][0],
        hy=world["hinge_position"][1],
        r=world["knob_radius"],
        kp1=world["pd_kp"][0],
        kp2=world["pd_kp"][1],
        kd1=world["pd_kd"][0],
        kd2=world["pd_kd"][1],
        slip_force=phi["slide_friction"] * world["grip_force"],
        k=world["coupling_stiffness"],
        c=world["coupling_damping"],
        dt=world["dt"],
        inertia=door_inertia(phi, world),
        friction_loss=phi["door_friction_loss"],
        stiffness=phi["door_stiffness"],
        damping=phi["door_damping"],
        d1=phi["joint_damping"][0],
        d2=phi["joint_damping"][1],
    )


def advance(
    m: PhysicsModel, s: SimState, qd1: float, qd2: float, vd1: float, vd2: float
) -> Tuple[SimState, Tuple[float, float], float]:
    q1, q2 = s.q
    w1, w2 = s.qdot
    lam, lamd = s.door_angle, s.door_rate
    dt = m.dt

    tau1 = m.kp1 * (qd1 - q1) + m.kd1 * (vd1 - w1)
    tau2 = m.kp2 * (qd2 - q2) + m.kd2 * (vd2 - w2)

    c1, s1 = math.cos(q1), math.sin(q1)
    c2, s2 = math.cos(q2), math.sin(q2)
    c12, s12 = math.cos(q1 + q2), math.sin(q1 + q2)
    ex = m.l1 * c1 + m.l2 * c12
    ey = m.l1 * s1 + m.l2 * s12
    j11, j12 = -m.l1 * s1 - m.l2 * s12, -m.l2 * s12
    j21, j22 = ex, m.l2 * c12
    vx = j11 * w1 + j12 * w2
    vy = j21 * w1 + j22 * w2

    # Knob position and d(knob)/d(door angle)
    cl, sl = math.cos(lam), math.sin(lam)
    kx, ky = m.hx - m.r * cl, m.hy - m.r * sl
    tx, ty = m.r * sl, -m.r * cl

    grasped = s.grasped
    fx = fy = force = 0.0
    door_load = coupling_damping = 0.0
    if grasped:
        dx = kx - ex - s.grasp_offset[0]
        dy = ky - ey - s.grasp_offset[1]
        fx = m.k * dx + m.c * (tx * lamd - vx)
        fy = m.k * dy + m.c * (ty * lamd - vy)
        force = math.hypot(fx, fy)
        if force > m.slip_force:
            grasped = False
            fx = fy = 0.0
        else:
            # Reaction on the knob; the door-rate damping part is integrated implicitly
            door_load = -(m.k * dx - m.c * vx) * tx - (m.k * dy - m.c * vy) * ty
            coupling_damping = m.c * (tx * tx + ty * ty)

    # Arm: (M + dt D) qdot' = M qdot + dt (tau - h + J^T F)
    m11 = m.m1 * m.l1 * m.l1 + m.m2 * (m.l1 * m.l1 + m.l2 * m.l2 + 2 * m.l1 * m.l2 * c2)
    m12 = m.m2 * (m.l2 * m.l2 + m.l1 * m.l2 * c2)
    m22 = m.m2 * m.l2 * m.l2
    hh = m.m2 * m.l1 * m.l2 * s2
    h1 = -hh * (2 * w1 * w2 + w2 * w2)
    h2 = hh * w1 * w1
    u1 = tau1 - h1 + j11 * fx + j21 * fy
    u2 = tau2 - h2 + j12 * fx + j22 * fy
    a11 = m11 + dt * m.d1
    a22 = m22 + dt * m.d2
    b1 = m11 * w1 + m12 * w2 + dt * u1
    b2 = m12 * w1 + m22 * w2 + dt * u2
    det = a11 * a22 - m12 * m12
    nw1 = (a22 * b1 - m12 * b2) / det
    nw2 = (a11 * b2 - m12 * b1) / det
    nq1 = q1 + dt * nw1
    nq2 = q2 + dt * nw2

    # Door
    friction = m.friction_loss * math.tanh(lamd / FRICTION_SMOOTHING)
    nlamd = (m.inertia * lamd + dt * (door_load - friction - m.stiffness * lam)) / (
        m.inertia + dt * (m.damping + coupling_damping)
    )
    nlam = lam + dt * nlamd
    if nlam < DOOR_ANGLE_MIN:
        nlam, nlamd = DOOR_ANGLE_MIN, 0.0
    elif nlam > DOOR_ANGLE_MAX:
        nlam, nlamd = DOOR_ANGLE_MAX, 0.0

    if not all(map(math.isfinite, (nq1, nq2, nw1, nw2, nlam, nlamd, tau1, tau2, force))):
        raise SimulationDivergedError(f"Simulation diverged at t={s.time + dt:.4f}s")

    state = SimState((nq1, nq2), (nw1, nw2), nlam, nlamd, grasped, s.time + dt, s.grasp_offset)
    return state, (tau1, tau2), force


def step(
    state: SimState,
    q_des: Sequence[float],
    qdot_des: Sequence[float],
    phi: DynParams,
    world: WorldConfig,
) -> Tuple[SimState, Tuple[float, float], float]:
    """
    Advance the world by one ``dt`` (semi-implicit Euler).

    Returns the new state, the commanded PD torque (which is also the sensed
    torque) and the magnitude of the grasp coupling force.

    :Raise SimulationDivergedError: If the new state is not finite.
    """
    return advance(
        physics_model(phi, world), state, float(q_des[0]), float(q_des[1]), float(qdot_des[0]), float(qdot_des[1])
    )


def initial_state(q0: Sequence[float], world: WorldConfig, door_angle: float = 0.0, grasped: bool = True) -> SimState:
    """Resting state at `q0` holding the knob where the gripper is."""
    position, _ = forward_kinematics(q0, world)
    offset = knob_position(door_angle, world) - position
    return SimState(
        (float(q0[0]), float(q0[1])),
        (0.0, 0.0),
        float(door_angle),
        0.0,
        grasped,
        0.0,
        (float(offset[0]), float(offset[1])),
    )


# Demonstration --------------------------------------------------------------------
def min_jerk(s: float) -> float:
    """Minimum-jerk time scaling on [0, 1]."""
    return 10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5


def door_profile(angle_target: float, duration: float, dt: float) -> np.ndarray:
    """Door angle at every sample of a minimum-jerk opening."""
    n = max(2, int(round(duration / dt)))
    tau = np.arange(n) / (n - 1)
    return angle_target * (10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5)


def grasp_pose(world: WorldConfig, elbow_sign: Optional[int] = None) -> np.ndarray:
    """Joint angles holding the knob of the closed door."""
    sign = world["elbow_sign"] if elbow_sign is None else elbow_sign
    return inverse_kinematics(knob_position(0.0, world), sign, world)


def synth_demo(
    world: WorldConfig, angle_target: float, duration: float, elbow_sign: Optional[int] = None
) -> np.ndarray:
    """
    Desired joint trajectory moving the knob along its arc while the door
    opens from 0 to `angle_target` with a minimum-jerk profile.

    :Raise OutOfWorkspaceError: If a waypoint is unreachable.
    """
    sign = world["elbow_sign"] if elbow_sign is None else elbow_sign
    profile = door_profile(angle_target, duration, world["dt"])
    return np.array([inverse_kinematics(knob_position(float(a), world), sign, world) for a in profile])


# Playback ---------------------------------------------------------------------------
def _run(q_desired: np.ndarray, phi: DynParams, world: WorldConfig, target_angle: Optional[float]) -> Trajectory:
    q_desired = np.asarray(q_desired, dtype=float)
    if q_desired.ndim != 2 or q_desired.shape[1] != 2 or len(q_desired) == 0:
        raise InvalidInputError("q_desired must be a non-empty sequence of 2 joint angles")
    n = len(q_desired)
    dt = world["dt"]
    qdot_desired = np.gradient(q_desired, dt, axis=0) if n > 1 else np.zeros_like(q_desired)
    if target_angle is None:
        target_angle = knob_angle_of(forward_kinematics(q_desired[-1], world)[0], world)

    model = physics_model(phi, world)
    state = initial_state(q_desired[0], world)
    q_actual = np.empty((n, 2))
    torque = np.empty((n, 2))
    door_angle = np.empty(n)
    lost_at: Optional[int] = None
    qd = q_desired.tolist()
    vd = qdot_desired.tolist()
    for k in range(n):
        state, tau, _ = advance(model, state, qd[k][0], qd[k][1], vd[k][0], vd[k][1])
        q_actual[k] = state.q
        torque[k] = tau
        door_angle[k] = state.door_angle
        if lost_at is None and not state.grasped:
            lost_at = k
    failed = lost_at is not None or door_angle[-1] < 0.5 * target_angle
    if lost_at is not None:
        log.debug(f"Grasp lost at step {lost_at} of {n}")
    return Trajectory(
        dt=dt,
        q_desired=q_desired.copy(),
        q_actual=q_actual,
        torque=torque,
        door_angle=door_angle,
        failed=bool(failed),
        seed=None,
        world_hash=sha256_json(world),
        params_hash=sha256_json(phi),
    )


def _with_noise(clean: Trajectory, noise_std: float, seed: int) -> Trajectory:
    rng = np.random.default_rng(int(seed) & U64_MASK)
    noisy = Trajectory(**{**clean.__dict__})
    noisy.torque = clean.torque + rng.normal(0.0, noise_std, size=clean.torque.shape)
    noisy.seed = int(seed)
    return noisy


def playback(
    q_desired: Sequence[Sequence[float]],
    phi: DynParams,
    world: WorldConfig,
    noise_seed: Optional[int] = None,
    target_angle: Optional[float] = None,
) -> Trajectory:
    """
    Track `q_desired` from the grasp pose at the closed door.

    The run fails if the grasp is lost or if the door ends below half of the
    target angle (inferred from the last waypoint unless given). When
    `noise_seed` is set, Gaussian sensor noise of ``world["noise_std"]`` is
    added to the recorded torques.
    """
    clean = _run(np.asarray(q_desired, dtype=float), phi, world, target_angle)
    if noise_seed is None:
        return clean
    return _with_noise(clean, world["noise_std"], noise_seed)


def gen_real_rollouts(
    q_desired: Sequence[Sequence[float]],
    phi_true: DynParams,
    world: WorldConfig,
    count: int,
    base_seed: int,
    target_angle: Optional[float] = None,
) -> List[Trajectory]:
    """`count` noisy playbacks of the ground truth with seeds ``base_seed + i``."""
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    clean = _run(np.asarray(q_desired, dtype=float), phi_true, world, target_angle)
    return [_with_noise(clean, world["noise_std"], base_seed + i) for i in range(count)]

