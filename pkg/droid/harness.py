"""
Experiment orchestration.

Usage exemple:

.. python::

    from droid.config import ExperimentConfig
    from droid.harness import Pipeline
    config = ExperimentConfig.fromfile("experiment.json")
    exit_code = Pipeline(config, "out/").run(["demo", "real", "identify"])
"""
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import math

import numpy as np

from droid import log
from droid.artifacts import METHODS, OutDir, STAGES, load_demo, save_demo
from droid.config import DemoConfig, DynParams, ExperimentConfig
from droid.errors import DroidError, InvalidConfigError, InvalidInputError, StageDependencyError
from droid.evaluate import evaluate_transfer, knob_generalization
from droid.identify import (
    CompareRow,
    IdentifyTrace,
    ParamDistribution,
    compare_distributions,
    optimize_distribution,
    torque_comparison,
    write_compare,
    write_torque_compare,
)
from droid.report import EvalReport, ReportCollection, emit_report, load_reports
from droid.rl import DynSource, PolicyNet, train_policy, write_curve
from droid.simenv import Trajectory, gen_real_rollouts, synth_demo
from droid.utils import write_csv

VARIANT_POSES: Tuple[str, str] = ("A", "B")


def parse_stages(value: Optional[str]) -> List[str]:
    """
    Read a comma separated list of stages, returned in pipeline order.

    :Raise InvalidConfigError: If a stage name is unknown.
    """
    if not value:
        return list(STAGES)
    names = [s.strip() for s in value.split(",") if s.strip()]
    unknown = [s for s in names if s not in STAGES]
    if unknown:
        raise InvalidConfigError(f"Unknown stage(s) {', '.join(unknown)}, known stages are {', '.join(STAGES)}")
    return [s for s in STAGES if s in names]


class Pipeline:
    """
    Runs the stages of one experiment in an output directory.

    Each stage reads the files of the previous one, so any stage can be
    re-run alone as long as its inputs are present.
    """

    def __init__(self, conf: ExperimentConfig, out_dir: str):
        self.conf = conf
        self.out = OutDir(out_dir)
        self._stages: Dict[str, Callable[[], None]] = {
            "demo": self.demo,
            "real": self.real,
            "identify": self.identify,
            "train": self.train,
            "eval": self.evaluate,
        }

    @property
    def target_angle(self) -> float:
        return math.radians(self.conf["demo"]["angle_target_deg"])

    @property
    def control_rate_hz(self) -> float:
        world = self.conf["world"]
        return 1.0 / (world["dt"] * world["control_decimation"])

    # Stages -----------------------------------------------------------------------
    def demo(self) -> None:
        demo: DemoConfig = self.conf["demo"]
        world = self.conf["world"]
        q_desired = synth_demo(world, self.target_angle, demo["duration"], elbow_sign=demo.elbow_sign)
        save_demo(self.out.ensure(self.out.demo), q_desired, world["dt"])
        log.info(f"Demonstration of {len(q_desired)} samples (pose {demo['pose']}) written to {self.out.demo}")

    def _load_demo(self, stage: str) -> np.ndarray:
        self.out.require(stage, self.out.demo)
        q_desired, dt = load_demo(self.out.demo)
        if dt is not None and not math.isclose(dt, self.conf["world"]["dt"], rel_tol=1e-9):
            raise InvalidInputError(f"Demonstration time step {dt} differs from world.dt {self.conf['world']['dt']}")
        return q_desired

    def real(self) -> None:
        q_desired = self._load_demo("real")
        rollouts = gen_real_rollouts(
            q_desired,
            self.conf["phi_true"],
            self.conf["world"],
            self.conf["identify"]["n_real"],
            self.conf["seeds"]["real"],
            target_angle=self.target_angle,
        )
        for i, traj in enumerate(rollouts):
            traj.save(self.out.ensure(self.out.real(i)))
        if rollouts[0].failed:
            log.warning("The reference rollouts fail the task, check the demonstration and phi_true")
        log.info(f"{len(rollouts)} reference rollouts written to {self.out.file('real')}")

    def _load_real(self, stage: str) -> List[Trajectory]:
        files = self.out.real_files()
        expected = self.conf["identify"]["n_real"]
        if len(files) < expected:
            raise StageDependencyError(
                f"Stage '{stage}' needs {expected} reference rollouts in {self.out.file('real')}, found {len(files)}. "
                f"Run the 'real' stage first."
            )
        return [Trajectory.load(f) for f in files[:expected]]

    def phi_init(self) -> ParamDistribution:
        return ParamDistribution.from_init(self.conf["phi_init"]["mean"], self.conf["phi_init"]["std"])

    def identify(self) -> None:
        q_desired = self._load_demo("identify")
        real_set = self._load_real("identify")
        phi_star, trace = optimize_distribution(
            self.phi_init(), q_desired, real_set, self.conf["world"], self.conf["identify"], target_angle=self.target_angle
        )
        phi_star.save(self.out.ensure(self.out.phi_star))
        trace.save(self.out.trace)
        table = torque_comparison(
            q_desired,
            real_set[0],
            self.conf["phi_init"]["mean"],
            phi_star.mean_params(),
            self.conf["world"],
            target_angle=self.target_angle,
        )
        write_torque_compare(self.out.torque_compare, table)
        log.info(f"Optimized distribution written to {self.out.phi_star}")
        log.debug(f"phi* mean: {dict(zip(phi_star.names, phi_star.mean.tolist()))}")

    def _sources(self) -> Dict[str, DynSource]:
        self.out.require("train", self.out.phi_star)
        phi_star = ParamDistribution.load(self.out.phi_star)
        return {
            "dr_init": self.phi_init(),
            "mu_opt": phi_star.mean_params(),
            "dr_opt": phi_star,
        }

    def train(self) -> None:
        sources = self._sources()
        for method, source in sources.items():
            log.info(f"Training policy '{METHODS[method]}'")
            net, curve = train_policy(source, self.conf["world"], self.conf["reward"], self.conf["ppo"])
            net.save(self.out.ensure(self.out.policy(method)))
            write_curve(self.out.curve(method), curve)
            log.info(f"Policy '{METHODS[method]}' written to {self.out.policy(method)}")

    def evaluate(self) -> None:
        policies = {method: self.out.policy(method) for method in METHODS}
        self.out.require("eval", *policies.values())
        ev = self.conf["eval"]
        reports: List[EvalReport] = []
        for method, path in policies.items():
            policy = PolicyNet.load(path)
            if ev["offsets"]:
                reports.extend(
                    knob_generalization(
                        policy,
                        self.conf["phi_true"],
                        self.conf["world"],
                        self.conf["reward"],
                        ev["offsets"],
                        ev["episodes"],
                        self.conf["seeds"]["eval"],
                        horizon=ev["horizon"],
                        method=METHODS[method],
                    )
                )
            else:
                reports.append(
                    evaluate_transfer(
                        policy,
                        self.conf["phi_true"],
                        self.conf["world"],
                        self.conf["reward"],
                        ev["episodes"],
                        self.conf["seeds"]["eval"],
                        horizon=ev["horizon"],
                        method=METHODS[method],
                    )
                )
        collection = emit_report(reports, self.out.eval_dir, control_rate_hz=self.control_rate_hz)
        log.info(repr(collection))

    # Driver -------------------------------------------------------------------------
    def run_stage(self, stage: str) -> None:
        log.info(f"Stage '{stage}' started")
        try:
            self._stages[stage]()
        except DroidError as err:
            if str(err).startswith(f"Stage '{stage}'"):
                raise
            # Same error type, with the stage name in front
            raise type(err)(f"Stage '{stage}': {err}") from err
        log.info(f"Stage '{stage}' finished")

    def run(self, stages: Sequence[str]) -> int:
        """
        Run `stages` in pipeline order and update the manifest.

        :Return: The exit code, 0 on success.
        """
        ordered = [s for s in STAGES if s in stages]
        log.debug(f"Configuration: {repr(self.conf)}")
        self.out.open()
        try:
            for stage in ordered:
                self.run_stage(stage)
            self.out.write_manifest(self.conf.hash(), dict(self.conf["seeds"]), ordered)
        finally:
            self.out.close()
        log.info("Pipeline finished successfully.")
        return 0


def run_pipeline(conf: ExperimentConfig, stages: Sequence[str], out_dir: str) -> int:
    return Pipeline(conf, out_dir).run(stages)


# Controlled experiments ------------------------------------------------------------
def identify_truth(
    conf: ExperimentConfig, phi_true: DynParams, pose: str
) -> Tuple[ParamDistribution, IdentifyTrace]:
    """Demonstration, reference rollouts and identification for one ground truth."""
    world = conf["world"]
    target = math.radians(conf["demo"]["angle_target_deg"])
    demo = DemoConfig(dict(conf["demo"], pose=pose)).validate()
    q_desired = synth_demo(world, target, demo["duration"], elbow_sign=demo.elbow_sign)
    real_set = gen_real_rollouts(
        q_desired, phi_true, world, conf["identify"]["n_real"], conf["seeds"]["real"], target_angle=target
    )
    phi_init = ParamDistribution.from_init(conf["phi_init"]["mean"], conf["phi_init"]["std"])
    return optimize_distribution(phi_init, q_desired, real_set, world, conf["identify"], target_angle=target)


def variants_table(
    phi_init: ParamDistribution, identified: Dict[str, ParamDistribution]
) -> Tuple[List[str], List[List[object]]]:
    """Rows are parameters. Columns are the initial mean and std then mean and std per variant."""
    header = ["name", "mu_init", "sigma_init"]
    for name in identified:
        header += [f"{name}_mean", f"{name}_std"]
    init_std = phi_init.std()
    rows: List[List[object]] = []
    for i, param in enumerate(phi_init.names):
        row: List[object] = [param, float(phi_init.mean[i]), float(init_std[i])]
        for dist in identified.values():
            row += [float(dist.mean[i]), float(dist.std()[i])]
        rows.append(row)
    return header, rows


def run_variants(conf: ExperimentConfig, out_dir: str) -> Tuple[List[List[object]], List[CompareRow]]:
    """
    Identify every named ground truth (``base`` and the ``phi_variants``)
    and the base truth from both demonstration poses.

    Writes ``variants/table.csv``, ``variants/compare.csv`` and the
    identified distributions and traces under ``variants/<name>/``.

    :Return: The rows of the variants table and the pose comparison.
    """
    out = OutDir(out_dir)
    out.open()
    try:
        identified: Dict[str, ParamDistribution] = {}
        pose = conf["demo"]["pose"]
        for name, truth in conf.variants().items():
            log.info(f"Identifying variant '{name}'")
            dist, trace = identify_truth(conf, truth, pose)
            dist.save(out.ensure(out.file("variants", name, "phi_star.json")))
            trace.save(out.file("variants", name, "trace.csv"))
            identified[name] = dist

        by_pose: Dict[str, ParamDistribution] = {pose: identified["base"]}
        for other in VARIANT_POSES:
            if other not in by_pose:
                log.info(f"Identifying base truth from demonstration pose {other}")
                dist, trace = identify_truth(conf, conf["phi_true"], other)
                dist.save(out.ensure(out.file("variants", f"pose_{other}", "phi_star.json")))
                trace.save(out.file("variants", f"pose_{other}", "trace.csv"))
                by_pose[other] = dist

        phi_init = ParamDistribution.from_init(conf["phi_init"]["mean"], conf["phi_init"]["std"])
        header, rows = variants_table(phi_init, identified)
        write_csv(out.file("variants", "table.csv"), header, rows)
        compare = compare_distributions(by_pose["A"], by_pose["B"])
        write_compare(out.file("variants", "compare.csv"), compare)
        log.info(f"Variants table written to {out.file('variants', 'table.csv')}")

        stiffness = [identified[n].mean_params()["door_stiffness"] for n in identified]
        if any(b <= a for a, b in zip(stiffness, stiffness[1:])):
            log.warning(
                f"Identified door stiffness is not increasing across variants: "
                f"{', '.join(f'{n}={s:.4g}' for n, s in zip(identified, stiffness))}"
            )
        overlapping = sum(1 for row in compare if row.bhattacharyya >= 0.5)
        log.info(f"Pose A vs B: {overlapping} of {len(compare)} parameters have a Bhattacharyya coefficient >= 0.5")
        out.write_manifest(conf.hash(), dict(conf["seeds"]), ["variants"])
    finally:
        out.close()
    return rows, compare


def show_reports(out_dir: str) -> ReportCollection:
    """Re-read the evaluation reports of `out_dir`."""
    out = OutDir(out_dir)
    out.require("report", f"{out.eval_dir}/reports.json")
    return load_reports(out.eval_dir)
