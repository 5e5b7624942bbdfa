"""Metrics rows and CSV output."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import CountMismatch

CSV_COLUMNS = ("trains", "mode", "detected", "avoided", "occurred", "efficiency_pct",
               "messages", "runtime_ms")


def efficiency(detected: int, avoided: int) -> float:
    """Share of detected incidents that were avoided, in percent.

    Defined as 100.0 when nothing was detected.
    """
    if detected < 0 or avoided < 0:
        raise CountMismatch("counts must be >= 0")
    if avoided > detected:
        raise CountMismatch(f"avoided ({avoided}) exceeds detected ({detected})")
    if detected == 0:
        return 100.0
    # 100 * avoided is exact, so the result is the correctly rounded percentage
    return 100.0 * avoided / detected


@dataclass(frozen=True)
class MetricsRow:
    trains: int
    mode: str
    detected: int
    avoided: int
    occurred: int
    messages: int
    runtime_ms: float = 0.0

    @property
    def efficiency_pct(self) -> float:
        return efficiency(self.detected, self.avoided)

    def cells(self) -> list[str]:
        # fixed formatting keeps the output independent of locale and platform
        return [str(self.trains), self.mode, str(self.detected), str(self.avoided),
                str(self.occurred), f"{self.efficiency_pct:.2f}", str(self.messages),
                f"{self.runtime_ms:.3f}"]


def row_from_report(report, runtime_ms: float = 0.0) -> MetricsRow:
    return MetricsRow(report.n_trains, str(report.mode), report.detected, report.avoided,
                      report.occurred, report.messages_total, runtime_ms)


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()
