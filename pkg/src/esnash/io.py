"""CSV trajectories and JSON summary reports."""

from __future__ import annotations

import io as _io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from esnash.analysis import RunMetrics, StabilityReport
from esnash.controller import FrequencyReport
from esnash.sim import Trajectory

CSV_FORMAT = "%.17g"


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_header(state_dim: int, n_players: int) -> list:
    cols = ["t"]
    cols += [f"x{r}" for r in range(1, state_dim + 1)]
    for prefix in ("u", "uhat", "a", "n", "J"):
        cols += [f"{prefix}{i}" for i in range(1, n_players + 1)]
    return cols


def trajectory_to_csv(traj: Trajectory) -> str:
    nx = traj.states.shape[1]
    N = traj.u.shape[1]
    table = np.column_stack([traj.times, traj.states, traj.u, traj.u_hat, traj.a, traj.n, traj.J])
    buf = _io.StringIO()
    np.savetxt(buf, table, fmt=CSV_FORMAT, delimiter=",", header=",".join(csv_header(nx, N)), comments="")
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path):
    write_atomic(path, trajectory_to_csv(traj))


def read_trajectory_csv(path) -> Trajectory:
    """Load a trajectory written by :func:`write_trajectory_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nx = sum(1 for c in header if c.startswith("x"))
    N = sum(1 for c in header if c.startswith("uhat"))
    if header != csv_header(nx, N):
        raise ValueError(f"{path}: unexpected CSV header {header}")
    cols = np.split(data, np.cumsum([1, nx, N, N, N, N]), axis=1)
    t, x, u, uh, a, n, J = cols
    return Trajectory(times=t[:, 0], states=x, u=u, u_hat=uh, a=a, n=n, J=J, t_end=float(t[-1, 0]))


@dataclass
class ArmResult:
    metrics: RunMetrics
    terminated_early: bool
    reason: Optional[str]
    t_end: float
    samples: int

    def to_dict(self):
        return {
            "metrics": self.metrics.to_dict(),
            "terminated_early": self.terminated_early,
            "reason": self.reason,
            "t_end": self.t_end,
            "samples": self.samples,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(RunMetrics.from_dict(d["metrics"]), d["terminated_early"], d["reason"], d["t_end"], d["samples"])


@dataclass
class SummaryReport:
    """Everything a command reports, in JSON-serialisable form."""

    version: str
    command: str
    config: Optional[dict] = None
    frequency_report: Optional[FrequencyReport] = None
    reference: Optional[dict] = None
    arms: dict = field(default_factory=dict)
    oscillation_ratio: Optional[list] = None
    stability: Optional[StabilityReport] = None
    notes: list = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self):
        return {
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "frequency_report": None if self.frequency_report is None else self.frequency_report.to_dict(),
            "reference": self.reference,
            "arms": {k: v.to_dict() for k, v in self.arms.items()},
            "oscillation_ratio": self.oscillation_ratio,
            "stability": None if self.stability is None else self.stability.to_dict(),
            "notes": list(self.notes),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            version=d["version"],
            command=d["command"],
            config=d["config"],
            frequency_report=None if d["frequency_report"] is None else FrequencyReport.from_dict(d["frequency_report"]),
            reference=d["reference"],
            arms={k: ArmResult.from_dict(v) for k, v in d["arms"].items()},
            oscillation_ratio=d["oscillation_ratio"],
            stability=None if d["stability"] is None else StabilityReport.from_dict(d["stability"]),
            notes=list(d["notes"]),
            error=d["error"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SummaryReport":
        return cls.from_dict(json.loads(text))
