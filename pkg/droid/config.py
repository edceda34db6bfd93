"""
Configuration dicts.

Every section of an experiment is a dict-like object with default values
applied to missing fields, a ``validate()`` method and helpers to read the
values with clear error messages.
"""
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import argparse
import copy
import json
import math
import os

import numpy as np

from droid import log
from droid.errors import InvalidConfigError, UnknownKeyError
from droid.utils import sha256_json, U64_MASK


def _path(prefix: str, key: str) -> str:
    return f"{prefix}.{key}" if prefix else key


def _getfloat(value: Any, path: str) -> float:
    """Return a finite float or raise `InvalidConfigError` naming the key."""
    if isinstance(value, bool):
        raise InvalidConfigError(f"Could not read float value in config for key '{path}' and value {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError) as err:
        raise InvalidConfigError(
            f"Could not read float value in config for key '{path}' and value {value!r}"
        ) from err
    if not math.isfinite(number):
        raise InvalidConfigError(f"Value for key '{path}' must be finite, got {value!r}")
    return number


def _getint(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidConfigError(
            f"Could not read int value in config for key '{path}' and value {value!r}. Must be an integer"
        )
    return int(value)


def _getvector(value: Any, path: str, length: int) -> List[float]:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise InvalidConfigError(
            f"Value for key '{path}' must be a list of {length} numbers, got {value!r}"
        )
    return [_getfloat(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise InvalidConfigError(f"Invalid value for key '{path}': {message}")


class Section(Dict[str, Any]):
    """
    Dict-Like base of all config sections.

    Missing fields get the value from `DEFAULTS`. Subclasses coerce and check
    their values in `validate`.
    """

    DEFAULTS: Dict[str, Any] = {}
    UNITS: Dict[str, str] = {}
    "Unit suffix of each field, used for the unit-bearing JSON form."

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        for key in self.DEFAULTS:
            self.setdefault(key, copy.deepcopy(self.DEFAULTS[key]))

    @property
    def FIELDS(self) -> Iterable[str]:
        return list(self.DEFAULTS.keys())

    def check_keys(self, prefix: str) -> None:
        """Raise `UnknownKeyError` if the section holds a key not in `DEFAULTS`."""
        for key in self:
            if key not in self.DEFAULTS:
                raise UnknownKeyError(f"Unknown config key '{_path(prefix, key)}'")

    def validate(self, prefix: str = "") -> "Section":
        self.check_keys(prefix)
        return self

    def to_unit_json(self) -> Dict[str, Any]:
        """Dict with unit-bearing field names, e.g. ``door_mass_kg``."""
        return {
            (f"{k}_{self.UNITS[k]}" if self.UNITS.get(k) else k): copy.deepcopy(v)
            for k, v in self.items()
        }

    @classmethod
    def from_unit_json(cls, data: Dict[str, Any]) -> Any:
        """Inverse of `to_unit_json`."""
        names = {(f"{k}_{u}" if u else k): k for k, u in cls.UNITS.items()}
        plain = {names.get(k, k): v for k, v in data.items()}
        return cls(plain).validate()


# Simulator world ------------------------------------------------------------
class WorldConfig(Section):
    """
    Fixed geometry and gains of the desk-scale arm + door world.

    The door hinge sits at `hinge_position`; with the door closed the knob is
    at ``hinge - (knob_radius, 0)`` and opening swings it towards the arm base.
    """

    DEFAULTS: Dict[str, Any] = {
        "link_lengths": [0.5, 0.5],
        "link_masses": [1.0, 1.0],
        "hinge_position": [0.75, 0.55],
        "knob_radius": 0.4,
        "pd_kp": [200.0, 200.0],
        "pd_kd": [20.0, 20.0],
        "grip_force": 20.0,
        "coupling_stiffness": 5000.0,
        "coupling_damping": 50.0,
        "dt": 0.001,
        "noise_std": 0.05,
        "elbow_sign": 1,
        "control_decimation": 20,
        "reset_jitter": 0.02,
    }
    UNITS = {
        "link_lengths": "m",
        "link_masses": "kg",
        "hinge_position": "m",
        "knob_radius": "m",
        "pd_kp": "nm_per_rad",
        "pd_kd": "nms_per_rad",
        "grip_force": "n",
        "coupling_stiffness": "n_per_m",
        "coupling_damping": "ns_per_m",
        "dt": "s",
        "noise_std": "nm",
        "elbow_sign": "",
        "control_decimation": "",
        "reset_jitter": "rad",
    }

    def validate(self, prefix: str = "world") -> "WorldConfig":
        self.check_keys(prefix)
        for key in ("link_lengths", "link_masses", "hinge_position", "pd_kp", "pd_kd"):
            self[key] = _getvector(self[key], _path(prefix, key), 2)
        for key in ("knob_radius", "grip_force", "coupling_stiffness", "coupling_damping", "dt", "noise_std", "reset_jitter"):
            self[key] = _getfloat(self[key], _path(prefix, key))
        self["elbow_sign"] = _getint(self["elbow_sign"], _path(prefix, "elbow_sign"))
        self["control_decimation"] = _getint(self["control_decimation"], _path(prefix, "control_decimation"))
        _require(self["dt"] > 0, _path(prefix, "dt"), "must be > 0")
        _require(self["knob_radius"] > 0, _path(prefix, "knob_radius"), "must be > 0")
        for key in ("link_lengths", "link_masses"):
            _require(min(self[key]) > 0, _path(prefix, key), "must be > 0")
        for key in ("pd_kp", "pd_kd"):
            _require(min(self[key]) >= 0, _path(prefix, key), "gains must be >= 0")
        for key in ("grip_force", "coupling_stiffness", "coupling_damping", "noise_std", "reset_jitter"):
            _require(self[key] >= 0, _path(prefix, key), "must be >= 0")
        _require(self["elbow_sign"] in (-1, 1), _path(prefix, "elbow_sign"), "must be 1 or -1")
        _require(self["control_decimation"] >= 1, _path(prefix, "control_decimation"), "must be >= 1")
        return self

    def with_knob_offset(self, offset: float) -> "WorldConfig":
        """Copy of the world with the knob moved `offset` metres along the lever arm."""
        world = WorldConfig(copy.deepcopy(dict(self)))
        world["knob_radius"] = float(self["knob_radius"]) + float(offset)
        return world.validate()


# Dynamics parameters ----------------------------------------------------------
PARAM_NAMES: Tuple[str, ...] = (
    "door_mass",
    "knob_mass",
    "door_friction_loss",
    "door_stiffness",
    "door_damping",
    "joint_damping_1",
    "joint_damping_2",
    "slide_friction",
)
"Order of the dynamics parameter vector."


class DynParams(Section):
    """Dynamics parameters of one simulated environment (phi)."""

    DEFAULTS: Dict[str, Any] = {
        "door_mass": 1.5,
        "knob_mass": 0.3,
        "door_friction_loss": 0.1,
        "door_stiffness": 0.02,
        "door_damping": 0.5,
        "joint_damping": [12.0, 0.6],
        "slide_friction": 1.2,
    }
    UNITS = {
        "door_mass": "kg",
        "knob_mass": "kg",
        "door_friction_loss": "nm",
        "door_stiffness": "nm_per_rad",
        "door_damping": "nms_per_rad",
        "joint_damping": "nms_per_rad",
        "slide_friction": "",
    }

    def _coerce(self, prefix: str) -> None:
        self.check_keys(prefix)
        for key in self.DEFAULTS:
            if key == "joint_damping":
                self[key] = _getvector(self[key], _path(prefix, key), 2)
            else:
                self[key] = _getfloat(self[key], _path(prefix, key))

    def validate(self, prefix: str = "phi_true") -> "DynParams":
        self._coerce(prefix)
        for key, value in zip(PARAM_NAMES, self.to_vector()):
            path = _path(prefix, "joint_damping" if key.startswith("joint_damping") else key)
            _require(value >= 0, path, f"must be >= 0, got {value}")
        _require(self["door_mass"] > 0, _path(prefix, "door_mass"), f"must be > 0, got {self['door_mass']}")
        return self

    def validate_spread(self, prefix: str) -> "DynParams":
        """Looser validation for standard deviations: finite and non-negative."""
        self._coerce(prefix)
        for key, value in zip(PARAM_NAMES, self.to_vector()):
            _require(value >= 0, _path(prefix, key), f"must be >= 0, got {value}")
        return self

    def to_vector(self) -> np.ndarray:
        return np.array(
            [
                self["door_mass"],
                self["knob_mass"],
                self["door_friction_loss"],
                self["door_stiffness"],
                self["door_damping"],
                self["joint_damping"][0],
                self["joint_damping"][1],
                self["slide_friction"],
            ],
            dtype=float,
        )

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "DynParams":
        v = [float(x) for x in vector]
        if len(v) != len(PARAM_NAMES):
            raise InvalidConfigError(f"Expected {len(PARAM_NAMES)} parameters, got {len(v)}")
        return cls(
            door_mass=v[0],
            knob_mass=v[1],
            door_friction_loss=v[2],
            door_stiffness=v[3],
            door_damping=v[4],
            joint_damping=[v[5], v[6]],
            slide_friction=v[7],
        )

    def shifted(self, offsets: Dict[str, Any], prefix: str = "phi_variants") -> "DynParams":
        """Copy with additive offsets applied (spring variants)."""
        params = DynParams(copy.deepcopy(dict(self)))
        for key, delta in offsets.items():
            path = _path(prefix, key)
            if key not in self.DEFAULTS:
                raise UnknownKeyError(f"Unknown config key '{path}'")
            if key == "joint_damping":
                d = _getvector(delta, path, 2)
                params[key] = [params[key][0] + d[0], params[key][1] + d[1]]
            else:
                params[key] = params[key] + _getfloat(delta, path)
        return params.validate(prefix)


# Identification, RL and reward ------------------------------------------------
class IdentifyConfig(Section):
    """Settings of the distribution optimization loop."""

    DEFAULTS: Dict[str, Any] = {
        "population": 30,
        "parents": 5,
        "n_real": 10,
        "failure_penalty": 10.0,
        "sigma0": 1.0,
        "max_generations": 60,
        "fitness_tolerance": 1e-3,
        "seed": 0,
        "workers": 1,
    }

    def validate(self, prefix: str = "identify") -> "IdentifyConfig":
        self.check_keys(prefix)
        for key in ("population", "parents", "n_real", "max_generations", "seed", "workers"):
            self[key] = _getint(self[key], _path(prefix, key))
        for key in ("failure_penalty", "sigma0", "fitness_tolerance"):
            self[key] = _getfloat(self[key], _path(prefix, key))
        _require(self["parents"] >= 1, _path(prefix, "parents"), "must be >= 1")
        _require(self["population"] >= self["parents"], _path(prefix, "population"), "must be >= parents")
        _require(self["n_real"] >= 1, _path(prefix, "n_real"), "must be >= 1")
        _require(self["failure_penalty"] >= 0, _path(prefix, "failure_penalty"), "must be >= 0")
        _require(self["sigma0"] > 0, _path(prefix, "sigma0"), "must be > 0")
        _require(self["max_generations"] >= 0, _path(prefix, "max_generations"), "must be >= 0")
        _require(self["fitness_tolerance"] >= 0, _path(prefix, "fitness_tolerance"), "must be >= 0")
        _require(self["workers"] >= 1, _path(prefix, "workers"), "must be >= 1")
        self["seed"] = self["seed"] & U64_MASK
        return self


class PpoConfig(Section):
    """PPO hyperparameters."""

    DEFAULTS: Dict[str, Any] = {
        "clip": 0.2,
        "discount": 0.99,
        "gae_lambda": 0.95,
        "learn_rate": 0.001,
        "minibatch": 64,
        "epochs_per_update": 10,
        "horizon": 512,
        "rollout_episodes_per_update": 4,
        "total_updates": 300,
        "seed": 0,
        "value_coef": 0.5,
        "entropy_coef": 0.01,
        "max_grad_norm": 0.5,
    }

    def validate(self, prefix: str = "ppo") -> "PpoConfig":
        self.check_keys(prefix)
        for key in ("minibatch", "epochs_per_update", "horizon", "rollout_episodes_per_update", "total_updates", "seed"):
            self[key] = _getint(self[key], _path(prefix, key))
        for key in ("clip", "discount", "gae_lambda", "learn_rate", "value_coef", "entropy_coef", "max_grad_norm"):
            self[key] = _getfloat(self[key], _path(prefix, key))
        _require(0 < self["discount"] <= 1, _path(prefix, "discount"), "must be in (0, 1]")
        _require(0 <= self["gae_lambda"] <= 1, _path(prefix, "gae_lambda"), "must be in [0, 1]")
        _require(self["clip"] > 0, _path(prefix, "clip"), "must be > 0")
        _require(self["learn_rate"] > 0, _path(prefix, "learn_rate"), "must be > 0")
        _require(self["minibatch"] >= 1, _path(prefix, "minibatch"), "must be >= 1")
        _require(self["epochs_per_update"] >= 0, _path(prefix, "epochs_per_update"), "must be >= 0")
        _require(self["horizon"] >= 1, _path(prefix, "horizon"), "must be >= 1")
        _require(self["rollout_episodes_per_update"] >= 1, _path(prefix, "rollout_episodes_per_update"), "must be >= 1")
        _require(self["total_updates"] >= 0, _path(prefix, "total_updates"), "must be >= 0")
        _require(self["max_grad_norm"] > 0, _path(prefix, "max_grad_norm"), "must be > 0")
        self["seed"] = self["seed"] & U64_MASK
        return self


class RewardWeights(Section):
    """Weights of the five door-opening reward terms and the distance-term switch."""

    DEFAULTS: Dict[str, Any] = {
        "w_door": 30.0,
        "w_ori": 1.0,
        "w_dist": 1.0,
        "w_log_dist": 1.0,
        "w_slip": 2.0,
        "switch_angle": math.radians(30.0),
        "terminal_penalty": 5.0,
    }

    def validate(self, prefix: str = "reward") -> "RewardWeights":
        self.check_keys(prefix)
        for key in self.DEFAULTS:
            self[key] = _getfloat(self[key], _path(prefix, key))
        _require(0 < self["switch_angle"] < math.pi / 2, _path(prefix, "switch_angle"), "must be in (0, pi/2)")
        return self


class DemoConfig(Section):
    DEFAULTS: Dict[str, Any] = {"angle_target_deg": 40.0, "duration": 4.0, "pose": "A"}

    def validate(self, prefix: str = "demo") -> "DemoConfig":
        self.check_keys(prefix)
        self["angle_target_deg"] = _getfloat(self["angle_target_deg"], _path(prefix, "angle_target_deg"))
        self["duration"] = _getfloat(self["duration"], _path(prefix, "duration"))
        _require(0 <= self["angle_target_deg"] <= 90, _path(prefix, "angle_target_deg"), "must be in [0, 90]")
        _require(self["duration"] > 0, _path(prefix, "duration"), "must be > 0")
        _require(self["pose"] in ("A", "B"), _path(prefix, "pose"), "must be 'A' or 'B'")
        return self

    @property
    def elbow_sign(self) -> int:
        """Pose B is the opposite elbow branch of pose A."""
        return 1 if self["pose"] == "A" else -1


class EvalConfig(Section):
    DEFAULTS: Dict[str, Any] = {"episodes": 30, "offsets": [0.0, 0.05, 0.10, 0.15], "horizon": 512}

    def validate(self, prefix: str = "eval") -> "EvalConfig":
        self.check_keys(prefix)
        self["episodes"] = _getint(self["episodes"], _path(prefix, "episodes"))
        self["horizon"] = _getint(self["horizon"], _path(prefix, "horizon"))
        if not isinstance(self["offsets"], list):
            raise InvalidConfigError(f"Value for key '{_path(prefix, 'offsets')}' must be a list")
        self["offsets"] = [_getfloat(v, f"{prefix}.offsets[{i}]") for i, v in enumerate(self["offsets"])]
        _require(self["episodes"] >= 1, _path(prefix, "episodes"), "must be >= 1")
        _require(self["horizon"] >= 1, _path(prefix, "horizon"), "must be >= 1")
        return self


class SeedsConfig(Section):
    DEFAULTS: Dict[str, Any] = {"demo": 1, "real": 2, "identify": 3, "train": 4, "eval": 5}

    def validate(self, prefix: str = "seeds") -> "SeedsConfig":
        self.check_keys(prefix)
        for key in self.DEFAULTS:
            self[key] = _getint(self[key], _path(prefix, key)) & U64_MASK
        return self

    def override(self, seed: int) -> None:
        """Replace every stage seed by `seed`."""
        for key in self.DEFAULTS:
            self[key] = int(seed) & U64_MASK


# Experiment configuration -------------------------------------------------------
class ExperimentConfig(Dict[str, Any]):
    """
    Dict-Like object.

    Use classmethods to create the config dict.

    Default values are applied to fields if not specified, unknown keys are
    rejected and every value is validated.
    """

    # Configuration template -------------------------
    TEMPLATE: Dict[str, Any] = {
        "world": dict(WorldConfig.DEFAULTS),
        "phi_true": dict(DynParams.DEFAULTS),
        "phi_variants": {
            "spring1": {"door_stiffness": 1.0, "door_damping": 0.5},
            "spring2": {"door_stiffness": 2.0, "door_damping": 1.0},
        },
        "phi_init": {
            "mean": {
                "door_mass": 1.144,
                "knob_mass": 0.199,
                "door_friction_loss": 0.05,
                "door_stiffness": 0.01,
                "door_damping": 2.0,
                "joint_damping": [10.0, 0.4],
                "slide_friction": 0.5,
            },
            "std": {
                "door_mass": 0.5,
                "knob_mass": 0.1,
                "door_friction_loss": 0.025,
                "door_stiffness": 0.005,
                "door_damping": 1.0,
                "joint_damping": [1.0, 0.2],
                "slide_friction": 0.25,
            },
        },
        "identify": dict(IdentifyConfig.DEFAULTS, seed=SeedsConfig.DEFAULTS["identify"]),
        "ppo": dict(PpoConfig.DEFAULTS, seed=SeedsConfig.DEFAULTS["train"]),
        "reward": dict(RewardWeights.DEFAULTS),
        "demo": dict(DemoConfig.DEFAULTS),
        "eval": dict(EvalConfig.DEFAULTS),
        "seeds": dict(SeedsConfig.DEFAULTS),
    }

    TEMPLATE_FILE: str = json.dumps(TEMPLATE, indent=4)

    FIELDS: Iterable[str] = list(TEMPLATE.keys())

    SEED_ENV = "DROID_SEED"
    "Environment variable overriding every stage seed."

    @classmethod
    def default(cls) -> "ExperimentConfig":
        """
        Get the default ExperimentConfig.
        """
        return cls.fromdict({})

    @classmethod
    def fromdict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Get config from a parsed JSON document. Omitted sections and fields get defaults.
        """
        if not isinstance(data, dict):
            raise InvalidConfigError("The configuration document must be a JSON object")
        config = cls(cls._build_config(data))
        env_seed = os.environ.get(cls.SEED_ENV)
        if env_seed:
            try:
                seed = int(env_seed)
            except ValueError as err:
                raise InvalidConfigError(f"Could not read int value of environment variable {cls.SEED_ENV}: {env_seed!r}") from err
            log.info(f"{cls.SEED_ENV} is set, overriding all stage seeds with {seed}")
            config.override_seed(seed)
        return config

    @classmethod
    def fromstring(cls, string: str) -> "ExperimentConfig":
        """
        Get the config dict from a JSON string.

        .. python::

            conf = ExperimentConfig.fromstring('''
                {
                    "phi_true": {"door_stiffness": 1.02},
                    "seeds": {"demo": 1, "real": 2, "identify": 3, "train": 4, "eval": 5}
                }
            ''')
        """
        try:
            data = json.loads(string)
        except ValueError as err:
            raise InvalidConfigError(f"Could not parse JSON configuration: {err}") from err
        return cls.fromdict(data)

    @classmethod
    def fromfile(cls, path: str) -> "ExperimentConfig":
        """
        Get config dict from a JSON file.
        """
        try:
            with open(path, "r") as fp:
                text = fp.read()
        except (FileNotFoundError, OSError) as err:
            raise InvalidConfigError(
                f"Could not read config {path}. Make sure the file exists and you have correct access right."
            ) from err
        log.info(f"Load config file: {path}")
        return cls.fromstring(text)

    @classmethod
    def fromcliargs(cls, cliargs: argparse.Namespace) -> "ExperimentConfig":
        """
        Get the config dict from CLI arguments: ``--config`` file (or defaults)
        and ``--seed`` override.
        """
        config = cls.fromfile(cliargs.config) if cliargs.config else cls.default()
        if getattr(cliargs, "seed", None) is not None:
            config.override_seed(cliargs.seed)
        return config

    def override_seed(self, seed: int) -> None:
        self["seeds"].override(seed)
        self["identify"]["seed"] = self["seeds"]["identify"]
        self["ppo"]["seed"] = self["seeds"]["train"]

    def variants(self) -> Dict[str, DynParams]:
        """Named ground truths: ``base`` plus every configured variant."""
        truths: Dict[str, DynParams] = {"base": self["phi_true"]}
        for name, offsets in self["phi_variants"].items():
            truths[name] = self["phi_true"].shifted(offsets, prefix=f"phi_variants.{name}")
        return truths

    def todict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self))

    def hash(self) -> str:
        return sha256_json(self.todict())

    def __repr__(self) -> str:
        """Get the config representation, ready for printing."""
        string = ""
        for k in self:
            string += f"\n{k:<15}\t=\t{json.dumps(self[k], sort_keys=True)}"
        return string

    @staticmethod
    def _build_config(data: Dict[str, Any]) -> Dict[str, Any]:
        for key in data:
            if key not in ExperimentConfig.TEMPLATE:
                raise UnknownKeyError(f"Unknown config key '{key}'")

        def section(key: str) -> Dict[str, Any]:
            value = data.get(key, {})
            if not isinstance(value, dict):
                raise InvalidConfigError(f"Config section '{key}' must be a JSON object")
            return copy.deepcopy(value)

        phi_init = section("phi_init")
        for key in phi_init:
            if key not in ("mean", "std"):
                raise UnknownKeyError(f"Unknown config key 'phi_init.{key}'")
        template_init = ExperimentConfig.TEMPLATE["phi_init"]
        init_mean = DynParams(phi_init.get("mean", template_init["mean"])).validate("phi_init.mean")
        init_std = DynParams(phi_init.get("std", template_init["std"])).validate_spread("phi_init.std")

        variants = section("phi_variants") if "phi_variants" in data else copy.deepcopy(ExperimentConfig.TEMPLATE["phi_variants"])
        for name, offsets in variants.items():
            if not isinstance(offsets, dict):
                raise InvalidConfigError(f"Config section 'phi_variants.{name}' must be a JSON object")
        if "base" in variants:
            raise InvalidConfigError("Variant name 'base' is reserved for phi_true")

        seeds = SeedsConfig(section("seeds")).validate()
        identify = IdentifyConfig(section("identify"))
        if "seed" not in data.get("identify", {}):
            identify["seed"] = seeds["identify"]
        ppo = PpoConfig(section("ppo"))
        if "seed" not in data.get("ppo", {}):
            ppo["seed"] = seeds["train"]

        config_dict: Dict[str, Any] = {
            "world": WorldConfig(section("world")).validate(),
            "phi_true": DynParams(section("phi_true")).validate("phi_true"),
            "phi_variants": variants,
            "phi_init": {"mean": init_mean, "std": init_std},
            "identify": identify.validate(),
            "ppo": ppo.validate(),
            "reward": RewardWeights(section("reward")).validate(),
            "demo": DemoConfig(section("demo")).validate(),
            "eval": EvalConfig(section("eval")).validate(),
            "seeds": seeds,
        }
        # Variants are validated eagerly so a bad offset fails at load time
        for name, offsets in variants.items():
            config_dict["phi_true"].shifted(offsets, prefix=f"phi_variants.{name}")
        return config_dict

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        """
        Init ExperimentConfig dict.

        :Note: Should not be used directly to create a config object.
               Use class methods instead.

        :Raise KeyError: If missing config field from ``**kwargs``.
        """
        super().__init__(*args, **kwargs)
        missing = [key for key in self.FIELDS if key not in self]
        if missing:
            fields = ", ".join(f"'{key}'" for key in missing)
            raise KeyError(f"Missing config field(s): {fields}. ")
