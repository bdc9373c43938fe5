"""Metrics CSV schema and writer.

Header order is fixed; missing metrics are emitted as empty fields, never
zeros. Floats use 17 significant digits so reruns can be compared
byte-for-byte. The file is flushed at every row (crash-tolerant logging).
"""

from __future__ import annotations

from dataclasses import dataclass

COLUMNS = (
    "iteration", "trajectories_sampled", "loss_forward", "loss_backward",
    "l1_exact", "l1_empirical", "spearman", "pearson", "modes_found",
    "log_z_estimate", "kl_exact", "pb_drift_l1", "lr_forward", "lr_backward",
    "epsilon", "wall_time_s", "seed",
)


@dataclass
class MetricsRow:
    iteration: int
    trajectories_sampled: int
    loss_forward: float | None = None
    loss_backward: float | None = None
    l1_exact: float | None = None
    l1_empirical: float | None = None
    spearman: float | None = None
    pearson: float | None = None
    modes_found: int | None = None
    log_z_estimate: float | None = None
    kl_exact: float | None = None
    pb_drift_l1: float | None = None
    lr_forward: float | None = None
    lr_backward: float | None = None
    epsilon: float | None = None
    wall_time_s: float | None = None
    seed: int | None = None

    def as_csv_line(self) -> str:
        return ",".join(_fmt(getattr(self, c)) for c in COLUMNS)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def header_line() -> str:
    return ",".join(COLUMNS)


class CsvWriter:
    """Append-only metrics writer; flushes after every row."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w")
        self._fh.write(header_line() + "\n")
        self._fh.flush()

    def write(self, row: MetricsRow) -> None:
        self._fh.write(row.as_csv_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_csv(path) -> dict[str, list]:
    """Columns as lists; empty fields become None, numerics parsed."""
    out: dict[str, list] = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for name in header:
            out[name] = []
        for line in fh:
            vals = line.rstrip("\n").split(",")
            for name, raw in zip(header, vals):
                if raw == "":
                    out[name].append(None)
                else:
                    try:
                        out[name].append(int(raw))
                    except ValueError:
                        out[name].append(float(raw))
    return out
