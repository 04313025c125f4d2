# -*- coding: utf-8 -*-

"""
This module reads and writes the CSV side of the app: query sets, per-scenario
evaluation reports, training loss curves and per-state similarities
"""
import csv
import io
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from newton_scenarios.catalog import SCENARIOS, lookup
from newton_scenarios.errors import CatalogError, IngestionError, MetricError
from newton_scenarios.worker_bank import QueryRecord
from newton_scenarios.worker_metrics import Curve3D
from newton_scenarios.worker_store import atomic_write


mlogger = logging.getLogger("newton-scenarios")


FIXED_COLUMNS = ["id", "entry_id", "state", "flow_u", "flow_v", "curve"]
AVG_COLUMN = "Avg."


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_text(path: str, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


def _csv_text(rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


class QueryReader:
    """
    Iterates over a query set CSV and yields QueryRecord objects

    Args:
        fh:                     path to the query set file
    """

    def __init__(self, fh: str):
        self.fh = fh

        self._length = None

    def __iter__(self):
        mlogger.debug(f"Initiating parsing of query set '{self.fh}'.")
        self._length = 0
        try:
            f = open(self.fh, "r", newline="")
        except OSError as exc:
            raise IngestionError(f"Unable to open query set '{self.fh}'. {exc}")
        with f:
            reader = csv.DictReader(f)
            feature_cols = self._feature_columns(reader.fieldnames)
            for row in reader:
                record = self._normalize_data(row, feature_cols)
                self._length += 1
                yield record

    def __len__(self):
        if self._length is None:
            for row in self:
                continue
        return self._length

    def _feature_columns(self, fieldnames: Optional[Sequence[str]]) -> List[str]:
        if not fieldnames:
            raise IngestionError(f"Query set '{self.fh}' has no header.")
        missing = [c for c in FIXED_COLUMNS if c not in fieldnames]
        if missing:
            raise IngestionError(
                f"Query set '{self.fh}' lacks columns: {', '.join(missing)}."
            )
        features = [c for c in fieldnames if c not in FIXED_COLUMNS]
        expected = [f"f{k}" for k in range(len(features))]
        if not features or features != expected:
            raise IngestionError(
                f"Query set '{self.fh}' feature columns must be f0..f{{R-1}}."
            )
        return features

    def _normalize_data(self, row: Dict, feature_cols: List[str]) -> QueryRecord:
        rid = row["id"]
        try:
            features = np.array([float(row[c]) for c in feature_cols])
        except (TypeError, ValueError):
            raise IngestionError(f"Query '{rid}' has malformed features.")
        return QueryRecord(
            id=rid,
            features=features,
            entry_id=self._normalize_entry(rid, row["entry_id"]),
            state=self._normalize_int(rid, row["state"]),
            flow=self._normalize_flow(rid, row["flow_u"], row["flow_v"]),
            curve=self._normalize_curve(rid, row["curve"]),
        )

    def _normalize_int(self, rid: str, value: str) -> Optional[int]:
        if not value:
            return None
        try:
            return int(value)
        except ValueError:
            raise IngestionError(f"Query '{rid}' has malformed integer '{value}'.")

    def _normalize_entry(self, rid: str, value: str) -> Optional[int]:
        entry_id = self._normalize_int(rid, value)
        if entry_id is not None:
            try:
                lookup(entry_id)
            except CatalogError as exc:
                raise IngestionError(f"Query '{rid}': {exc}")
        return entry_id

    def _normalize_flow(self, rid: str, u: str, v: str) -> Optional[np.ndarray]:
        if not u and not v:
            return None
        try:
            return np.array([float(u), float(v)])
        except ValueError:
            raise IngestionError(f"Query '{rid}' has malformed flow '{u}', '{v}'.")

    def _normalize_curve(self, rid: str, value: str) -> Optional[Curve3D]:
        if not value:
            return None
        try:
            points = [[float(x) for x in p.split()] for p in value.split(";")]
            return Curve3D(points)
        except ValueError:
            raise IngestionError(f"Query '{rid}' has a malformed curve.")
        except MetricError as exc:
            raise IngestionError(f"Query '{rid}' has an invalid curve. {exc}")


def read_queries(fh: str) -> List[QueryRecord]:
    """
    Loads whole query set and checks that feature lengths agree

    Args:
        fh:                     query set path

    Returns:
        list of QueryRecord
    """
    records = list(QueryReader(fh))
    if not records:
        raise IngestionError(f"Query set '{fh}' is empty.")
    lengths = {len(r.features) for r in records}
    if len(lengths) > 1:
        raise IngestionError(
            f"Query set '{fh}' mixes feature lengths {sorted(lengths)}."
        )
    return records


def write_queries(fh: str, records: Sequence[QueryRecord]) -> None:
    if not records:
        raise IngestionError("Refusing to write an empty query set.")
    raw_dim = len(records[0].features)
    header = FIXED_COLUMNS + [f"f{k}" for k in range(raw_dim)]
    rows = [header]
    for r in records:
        if len(r.features) != raw_dim:
            raise IngestionError(f"Query '{r.id}' has {len(r.features)} features.")
        curve = (
            ";".join(" ".join(_fmt(x) for x in p) for p in r.curve.points)
            if r.curve is not None
            else ""
        )
        flow = [_fmt(x) for x in r.flow] if r.flow is not None else ["", ""]
        rows.append(
            [
                r.id,
                "" if r.entry_id is None else str(r.entry_id),
                "" if r.state is None else str(r.state),
                *flow,
                curve,
                *(_fmt(x) for x in r.features),
            ]
        )
    _write_text(fh, _csv_text(rows))
    mlogger.info(f"Wrote {len(records)} queries to '{fh}'.")


def scenario_report(values: Dict[int, List[float]]) -> List[float]:
    """
    Per-scenario means for scenarios 1-12 followed by the mean over the
    scenarios that have values; scenarios without values are NaN

    Args:
        values:                 scenario id -> list of per-query values

    Returns:
        13 numbers
    """
    means = []
    for scenario in SCENARIOS:
        vals = values.get(scenario.id, [])
        means.append(float(np.mean(vals)) if vals else math.nan)
    present = [m for m in means if not math.isnan(m)]
    means.append(float(np.mean(present)) if present else math.nan)
    return means


def write_report(fh: str, metric: str, row: Sequence[float]) -> None:
    """
    Writes 13-column report: one column per scenario and the average
    """
    _write_text(fh, format_report(metric, row))


def write_report_rows(fh: str, rows: Sequence[Tuple[str, Sequence[float]]]) -> None:
    _write_text(fh, format_rows(rows))


def format_report(metric: str, row: Sequence[float]) -> str:
    return format_rows([(metric, row)])


def format_rows(rows: Sequence[Tuple[str, Sequence[float]]]) -> str:
    """
    Report table with one labelled row per evaluated model
    """
    header = ["metric"] + [str(s.id) for s in SCENARIOS] + [AVG_COLUMN]
    return _csv_text(
        [header] + [[label] + [f"{v:.4f}" for v in row] for label, row in rows]
    )


def read_report_rows(fh: str) -> Dict[str, Dict[str, float]]:
    with open(fh, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        return {
            cells[0]: {k: float(v) for k, v in zip(header[1:], cells[1:])}
            for cells in reader
        }


def read_report(fh: str) -> Dict[str, float]:
    """first row of a report"""
    return next(iter(read_report_rows(fh).values()))


def write_losses(fh: str, losses: Sequence[float]) -> None:
    rows = [["iteration", "loss"]]
    rows.extend([str(i), _fmt(loss)] for i, loss in enumerate(losses, start=1))
    _write_text(fh, _csv_text(rows))


def write_similarities(
    fh: str, matches: Sequence[Tuple[str, int, Sequence[float]]]
) -> None:
    """
    Per-state similarities of each query against its matched entry

    Args:
        fh:                     output CSV
        matches:                (query id, entry_id, per-state similarities)
    """
    rows = [["query_id", "entry_id", "state", "similarity"]]
    for qid, entry_id, per_state in matches:
        rows.extend(
            [qid, str(entry_id), str(k), _fmt(s)]
            for k, s in enumerate(per_state, start=1)
        )
    _write_text(fh, _csv_text(rows))
