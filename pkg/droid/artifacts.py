"""
Interface to the output directory of an experiment.

Every stage reads and writes its files at fixed paths below ``out_dir`` and
``manifest.json`` records the hashes of everything written so far.
"""
from typing import Any, Dict, List, Optional, Tuple
import json
import os

import numpy as np
from filelock import FileLock, Timeout

from droid import log
from droid.errors import InvalidInputError, OutDirLockedError, StageDependencyError
from droid.utils import canonical_json, read_csv, sha256_file, write_csv

STAGES: Tuple[str, ...] = ("demo", "real", "identify", "train", "eval")

METHODS: Dict[str, str] = {
    "dr_init": "DR",
    "mu_opt": "mu_opt",
    "dr_opt": "DROID-DR",
}
"Training methods and their display names, in evaluation order."

LOCK_FILE = ".droid.lock"
MANIFEST_FILE = "manifest.json"
DEMO_HEADER = ["t", "q1", "q2"]


class OutDir:
    """
    Paths of the artifacts of one experiment.

    Only one process can use an output directory at a time, the lock is taken
    with `open` and released with `close`.
    """

    def __init__(self, path: str) -> None:
        self.path = path
        os.makedirs(path, exist_ok=True)
        self._lock = FileLock(os.path.join(path, LOCK_FILE))

    def __enter__(self) -> "OutDir":
        self.open()
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def open(self) -> None:
        """
        Acquire the lock file of the directory.

        :Raise OutDirLockedError: If another process holds it.
        """
        try:
            self._lock.acquire(timeout=1)
        except Timeout as err:
            raise OutDirLockedError(
                f"Could not use the output directory '{self.path}' because another droid process is using it"
            ) from err
        log.debug(f"Acquired lock file '{self._lock.lock_file}'")

    def close(self) -> None:
        self._lock.release()
        log.debug(f"Released lock file '{self._lock.lock_file}'")

    # Paths ----------------------------------------------------------------------
    def file(self, stage: str, *parts: str) -> str:
        return os.path.join(self.path, stage, *parts)

    @staticmethod
    def ensure(path: str) -> str:
        """Create the parent directory of `path` and return `path`."""
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    @property
    def demo(self) -> str:
        return self.file("demo", "demo.csv")

    def real(self, index: int) -> str:
        return self.file("real", f"real_{index:03d}.csv")

    def real_files(self) -> List[str]:
        directory = os.path.join(self.path, "real")
        if not os.path.isdir(directory):
            return []
        return sorted(
            os.path.join(directory, name)
            for name in os.listdir(directory)
            if name.startswith("real_") and name.endswith(".csv")
        )

    @property
    def phi_star(self) -> str:
        return self.file("identify", "phi_star.json")

    @property
    def trace(self) -> str:
        return self.file("identify", "trace.csv")

    @property
    def torque_compare(self) -> str:
        return self.file("identify", "torque_compare.csv")

    def policy(self, method: str) -> str:
        return self.file("train", method, "policy.json")

    def curve(self, method: str) -> str:
        return self.file("train", method, "curve.csv")

    @property
    def eval_dir(self) -> str:
        return os.path.join(self.path, "eval")

    @property
    def manifest(self) -> str:
        return os.path.join(self.path, MANIFEST_FILE)

    def require(self, stage: str, *paths: str) -> None:
        """
        :Raise StageDependencyError: If one of `paths` does not exist.
        """
        missing = [p for p in paths if not os.path.isfile(p)]
        if missing:
            raise StageDependencyError(
                f"Stage '{stage}' needs {', '.join(os.path.relpath(p, self.path) for p in missing)}. "
                f"Run the previous stages first."
            )

    # Manifest ---------------------------------------------------------------------
    def artifacts(self) -> Dict[str, str]:
        """SHA-256 of every file written by the stages, keyed by relative path."""
        hashes: Dict[str, str] = {}
        for stage in STAGES + ("variants",):
            root = os.path.join(self.path, stage)
            if not os.path.isdir(root):
                continue
            for directory, _, names in os.walk(root):
                for name in names:
                    path = os.path.join(directory, name)
                    hashes[os.path.relpath(path, self.path).replace(os.sep, "/")] = sha256_file(path)
        return dict(sorted(hashes.items()))

    def read_manifest(self) -> Dict[str, Any]:
        if not os.path.isfile(self.manifest):
            return {}
        try:
            with open(self.manifest, "r") as fp:
                data = json.load(fp)
        except ValueError as err:
            raise InvalidInputError(f"Could not parse {self.manifest}: {err}") from err
        return data if isinstance(data, dict) else {}

    def write_manifest(self, config_hash: str, seeds: Dict[str, int], stages: List[str]) -> Dict[str, Any]:
        """
        Merge the current state of the directory into ``manifest.json``.

        Stages run earlier with another configuration keep their recorded
        config hash under ``stages``. No timestamp is stored so the manifest
        is a pure function of the artifacts.
        """
        manifest = self.read_manifest()
        recorded = dict(manifest.get("stages", {}))
        for stage in stages:
            recorded[stage] = {"config_hash": config_hash, "seed": int(seeds.get(stage, 0))}
        manifest = {
            "config_hash": config_hash,
            "seeds": {k: int(v) for k, v in sorted(seeds.items())},
            "stages": dict(sorted(recorded.items())),
            "artifacts": self.artifacts(),
        }
        with open(self.manifest, "w") as fp:
            fp.write(canonical_json(manifest) + "\n")
        log.info(f"Manifest written to {self.manifest}")
        return manifest


# Demonstration file -------------------------------------------------------------
def save_demo(path: str, q_desired: np.ndarray, dt: float) -> None:
    q_desired = np.asarray(q_desired, dtype=float)
    times = dt * np.arange(len(q_desired))
    write_csv(path, DEMO_HEADER, zip(times, q_desired[:, 0], q_desired[:, 1]))


def load_demo(path: str) -> Tuple[np.ndarray, Optional[float]]:
    """
    :Return: The desired joint trajectory and its time step (None for a single sample).
    """
    rows = read_csv(path)
    if not rows or rows[0] != DEMO_HEADER:
        raise InvalidInputError(f"{path} is not a demonstration file, header must be {','.join(DEMO_HEADER)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, 3)
    except ValueError as err:
        raise InvalidInputError(f"Could not read demonstration {path}: {err}") from err
    if len(data) == 0:
        raise InvalidInputError(f"Demonstration {path} is empty")
    dt = float(data[1, 0] - data[0, 0]) if len(data) > 1 else None
    return data[:, 1:3].copy(), dt
