"""
Containers for evaluation results data structure.
"""
from typing import Any, Dict, Iterable, List, Optional, Sequence
import json
import math
import os

import numpy as np

from droid import log
from droid.errors import InvalidInputError
from droid.utils import write_csv

SUCCESS_ANGLE_DEG = 30.0
HISTOGRAM_EDGES_DEG: List[float] = [float(e) for e in range(0, 100, 10)]

RESULTS_HEADER = [
    "method",
    "offset",
    "episodes",
    "success_rate",
    "open_angle_mean_deg",
    "open_angle_std_deg",
    "open_steps_mean",
    "open_steps_std",
    "open_steps_count",
]
HISTOGRAM_HEADER = ["method", "offset", "bin_low_deg", "bin_high_deg", "fraction"]
EPISODES_HEADER = ["method", "offset", "episode", "seed", "max_angle_deg", "steps_to_30", "success"]


class EvalReport(Dict[str, Any]):
    """
    Dict-Like object to store the transfer metrics of one method.

    Keys:

    - "method"
    - "offset": knob offset along the lever arm (m)
    - "episodes"
    - "success_rate": fraction of episodes whose maximal door angle exceeds 30 degrees
    - "open_angle_mean", "open_angle_std": maximal door angle per episode (degrees)
    - "open_steps_mean", "open_steps_std", "open_steps_count": control steps
      to the first crossing of 30 degrees, over the episodes that cross
    - "histogram_edges", "histogram": 10 degree bins and per-bin fractions
    - "raw": per-episode records
    """

    DEFAULT_REPORT: Dict[str, Any] = {
        "method": "",
        "offset": 0.0,
        "episodes": 0,
        "success_rate": 0.0,
        "open_angle_mean": 0.0,
        "open_angle_std": 0.0,
        "open_steps_mean": None,
        "open_steps_std": None,
        "open_steps_count": 0,
        "histogram_edges": HISTOGRAM_EDGES_DEG,
        "histogram": [],
        "raw": [],
    }

    FIELDS: Iterable[str] = list(DEFAULT_REPORT.keys())

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        for key in self.FIELDS:
            self.setdefault(key, self.DEFAULT_REPORT[key])

    @classmethod
    def from_episodes(cls, method: str, episodes: Sequence[Dict[str, Any]], offset: float = 0.0) -> "EvalReport":
        """
        Aggregate per-episode records with keys ``episode``, ``seed``,
        ``max_angle_deg`` and ``steps_to_30`` (None when never crossed).
        """
        raw = []
        for e in episodes:
            record = dict(e)
            record["success"] = bool(record["max_angle_deg"] > SUCCESS_ANGLE_DEG)
            raw.append(record)
        angles = np.array([r["max_angle_deg"] for r in raw], dtype=float)
        steps = np.array([r["steps_to_30"] for r in raw if r["steps_to_30"] is not None], dtype=float)
        counts, _ = np.histogram(np.clip(angles, HISTOGRAM_EDGES_DEG[0], HISTOGRAM_EDGES_DEG[-1]), bins=HISTOGRAM_EDGES_DEG)
        n = len(raw)
        return cls(
            method=method,
            offset=float(offset),
            episodes=n,
            success_rate=float(np.mean([r["success"] for r in raw])) if n else 0.0,
            open_angle_mean=float(angles.mean()) if n else 0.0,
            open_angle_std=float(angles.std()) if n else 0.0,
            open_steps_mean=float(steps.mean()) if len(steps) else None,
            open_steps_std=float(steps.std()) if len(steps) else None,
            open_steps_count=int(len(steps)),
            histogram_edges=list(HISTOGRAM_EDGES_DEG),
            histogram=[float(c) / n for c in counts] if n else [0.0] * (len(HISTOGRAM_EDGES_DEG) - 1),
            raw=raw,
        )

    def scalars(self) -> List[Any]:
        return [
            self["method"],
            self["offset"],
            self["episodes"],
            self["success_rate"],
            self["open_angle_mean"],
            self["open_angle_std"],
            self["open_steps_mean"],
            self["open_steps_std"],
            self["open_steps_count"],
        ]


class ReportCollection(List[EvalReport]):
    """
    List-Like object to store reports.
    """

    control_rate_hz: Optional[float] = None

    def __repr__(self) -> str:
        """
        Get the summary string.

        :Return: Summary table of all reports contained in the collection, in order.
                 Columns are: "Method", "Offset", "Success", "Angle", "Open steps"
        """
        results = [item for item in self if item]
        if not results:
            return "No evaluation report to show"
        unit = f"control steps at {self.control_rate_hz:g} Hz" if self.control_rate_hz else "control steps"
        string = f"Transfer evaluation summary (success: door angle > {SUCCESS_ANGLE_DEG:g} deg, open steps in {unit})\n"
        header = ("Method", "Offset (m)", "Success", "Angle (deg)", "Open steps")
        method_w = 12
        # Determine the longest width for method column
        for r in results:
            method_w = len(r["method"]) + 4 if len(r["method"]) + 4 > method_w else method_w
        frow = "{:<%d} {:<11} {:<9} {:<16} {}" % method_w
        string += frow.format(*header)
        for row in results:
            steps = (
                f"{row['open_steps_mean']:.1f} +/- {row['open_steps_std']:.1f} (n={row['open_steps_count']})"
                if row["open_steps_mean"] is not None
                else "-"
            )
            string += "\n"
            string += frow.format(
                str(row["method"]),
                f"{row['offset']:.2f}",
                f"{row['success_rate'] * 100:.1f}%",
                f"{row['open_angle_mean']:.1f} +/- {row['open_angle_std']:.1f}",
                steps,
            )
        return string


def emit_report(reports: Sequence[EvalReport], path: str, control_rate_hz: Optional[float] = None) -> ReportCollection:
    """
    Write ``results.csv``, ``histogram.csv``, ``episodes_raw.csv``,
    ``summary.txt`` and ``reports.json`` in the directory `path`.

    :Raise OSError: If the directory is not writable.
    """
    if not reports:
        raise InvalidInputError("No report to emit")
    collection = ReportCollection(reports)
    collection.control_rate_hz = control_rate_hz
    os.makedirs(path, exist_ok=True)

    write_csv(os.path.join(path, "results.csv"), RESULTS_HEADER, (r.scalars() for r in collection))

    hist_rows = []
    for r in collection:
        edges = r["histogram_edges"]
        for i, fraction in enumerate(r["histogram"]):
            hist_rows.append([r["method"], r["offset"], edges[i], edges[i + 1], fraction])
    write_csv(os.path.join(path, "histogram.csv"), HISTOGRAM_HEADER, hist_rows)

    raw_rows = []
    for r in collection:
        for e in r["raw"]:
            raw_rows.append(
                [r["method"], r["offset"], e["episode"], e["seed"], e["max_angle_deg"], e["steps_to_30"], e["success"]]
            )
    write_csv(os.path.join(path, "episodes_raw.csv"), EPISODES_HEADER, raw_rows)

    with open(os.path.join(path, "summary.txt"), "w") as fp:
        fp.write(repr(collection) + "\n")
    with open(os.path.join(path, "reports.json"), "w") as fp:
        json.dump({"control_rate_hz": control_rate_hz, "reports": list(collection)}, fp, indent=2, sort_keys=True)
    log.info(f"Evaluation reports written to {path}")
    return collection


def load_reports(path: str) -> ReportCollection:
    """Read ``reports.json`` from the directory `path`."""
    with open(os.path.join(path, "reports.json"), "r") as fp:
        data = json.load(fp)
    collection = ReportCollection(EvalReport(r) for r in data["reports"])
    collection.control_rate_hz = data.get("control_rate_hz")
    return collection
