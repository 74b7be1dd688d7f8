"""Revenue, cost, and long-term performance bookkeeping."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .network import Embedding, VirtualNetworkRequest


class NonMonotonicTime(Exception):
    """Window snapshots must be taken at strictly increasing times."""


def revenue(vnr: VirtualNetworkRequest) -> int:
    """Total requested resources: every CPU demand plus every bandwidth demand."""
    return sum(vn.cpu_demand for vn in vnr.nodes) + sum(vl.bw_demand for vl in vnr.links)


def cost(vnr: VirtualNetworkRequest, embedding: Embedding) -> int:
    """Substrate resources consumed: CPU once, bandwidth once per path hop."""
    total = sum(vn.cpu_demand for vn in vnr.nodes)
    for vl in vnr.links:
        total += vl.bw_demand * len(embedding.link_assignment[vl.endpoints])
    return total


@dataclass
class WindowRecord:
    """Cumulative counters captured at one window boundary.

    Ratio fields are None while undefined (no arrivals yet, zero cost,
    zero elapsed time); they are written as empty CSV cells.
    """

    time: float
    cum_revenue: int
    cum_cost: int
    avg_revenue: float | None
    rc_ratio: float | None
    acceptance_rate: float | None
    arrivals: int
    acceptances: int


class MetricsLedger:
    """Cumulative counters for one run plus the windowed time series.

    Revenue and cost only ever grow: departures return substrate resources
    but never subtract from the totals.
    """

    def __init__(self):
        self.total_revenue = 0
        self.total_cost = 0
        self.arrivals = 0
        self.acceptances = 0
        self.horizon = 0.0
        self.windows: list[WindowRecord] = []

    def record_arrival(self, time: float) -> None:
        self.arrivals += 1
        self.horizon = max(self.horizon, time)

    def record_acceptance(self, time: float, revenue_value: int, cost_value: int) -> None:
        self.acceptances += 1
        self.total_revenue += revenue_value
        self.total_cost += cost_value
        self.horizon = max(self.horizon, time)

    def acceptance_rate(self) -> float | None:
        """Accepted over arrived; None before the first arrival."""
        if self.arrivals == 0:
            return None
        return self.acceptances / self.arrivals

    def rc_ratio(self) -> float | None:
        """Summed revenue over summed cost, not a mean of per-request ratios.

        None while total cost is zero.
        """
        if self.total_cost == 0:
            return None
        return self.total_revenue / self.total_cost

    def average_revenue(self, time: float | None = None) -> float | None:
        """Cumulative revenue per unit time; None while no time has passed.

        Defaults to the latest observed time when ``time`` is omitted.
        """
        horizon = self.horizon if time is None else time
        if horizon <= 0:
            return None
        return self.total_revenue / horizon

    def snapshot(self, time: float) -> WindowRecord:
        """Capture cumulative state at a window boundary.

        Boundaries must strictly increase and must not precede events
        already recorded; raises NonMonotonicTime otherwise.
        """
        if self.windows and time <= self.windows[-1].time:
            raise NonMonotonicTime(f"snapshot at {time} is not after {self.windows[-1].time}")
        if time < self.horizon:
            raise NonMonotonicTime(f"snapshot at {time} precedes events up to {self.horizon}")
        self.horizon = max(self.horizon, time)
        record = WindowRecord(
            time=time,
            cum_revenue=self.total_revenue,
            cum_cost=self.total_cost,
            avg_revenue=self.average_revenue(time),
            rc_ratio=self.rc_ratio(),
            acceptance_rate=self.acceptance_rate(),
            arrivals=self.arrivals,
            acceptances=self.acceptances,
        )
        self.windows.append(record)
        return record


WINDOW_COLUMNS = (
    "time", "cum_revenue", "cum_cost", "avg_revenue",
    "rc_ratio", "acceptance_rate", "arrivals", "acceptances",
)


def csv_cell(value) -> str:
    """One deterministic CSV cell: None becomes empty, floats use repr."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _window_cells(record: WindowRecord) -> list[str]:
    return [
        csv_cell(record.time),
        csv_cell(record.cum_revenue),
        csv_cell(record.cum_cost),
        csv_cell(record.avg_revenue),
        csv_cell(record.rc_ratio),
        csv_cell(record.acceptance_rate),
        csv_cell(record.arrivals),
        csv_cell(record.acceptances),
    ]


def write_window_csv(
    records: Sequence[WindowRecord], path: str | Path, manifest_hash: str | None = None
) -> None:
    """Write the windowed series; a manifest hash goes into a leading comment."""
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(WINDOW_COLUMNS)
        for record in records:
            writer.writerow(_window_cells(record))


def write_compare_csv(
    rows: Sequence[tuple[str, int, WindowRecord]],
    path: str | Path,
    manifest_hash: str | None = None,
) -> None:
    """Long-format series for several engines and seeds in one file."""
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(("engine", "seed") + WINDOW_COLUMNS)
        for engine, seed, record in rows:
            writer.writerow([engine, str(seed)] + _window_cells(record))


def read_window_csv(path: str | Path) -> tuple[str | None, list[WindowRecord]]:
    """Inverse of write_window_csv: (manifest hash or None, records)."""
    with open(path, newline="") as fh:
        first = fh.readline()
        manifest_hash = None
        if first.startswith("# manifest="):
            manifest_hash = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != WINDOW_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        records = []
        for row in reader:
            records.append(WindowRecord(
                time=float(row[0]),
                cum_revenue=int(row[1]),
                cum_cost=int(row[2]),
                avg_revenue=float(row[3]) if row[3] else None,
                rc_ratio=float(row[4]) if row[4] else None,
                acceptance_rate=float(row[5]) if row[5] else None,
                arrivals=int(row[6]),
                acceptances=int(row[7]),
            ))
    return manifest_hash, records
