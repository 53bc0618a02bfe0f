import csv
import io
import json
import logging
import math
import os
import os.path as osp
import tempfile

import numpy as np

from dyestk.constants import CSV_FLOAT_FORMAT
from dyestk.exceptions import NonFiniteValue

log = logging.getLogger(__name__)


def to_jsonable(value):
    """
    Convert a report into plain JSON types. numpy arrays become lists and +/-inf becomes None.
    NaN is rejected.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            raise NonFiniteValue("JSON report (NaN)")
        return None if math.isinf(value) else value
    return value


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, allow_nan=False)


def atomic_write_text(path: str, text: str) -> None:
    """
    Write a file through a temporary file in the same directory and an atomic rename.
    """
    directory = osp.dirname(osp.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if osp.exists(tmp_path):
            os.remove(tmp_path)
        raise
    log.info("Saved %s", path)


def write_json(path: str, report: dict) -> None:
    atomic_write_text(path, dumps_report(report) + "\n")


def format_float(value) -> str:
    if value is None:
        return ""
    return CSV_FLOAT_FORMAT % value


def _csv_text(header: list, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def trajectory_csv(trajectory, dim: int) -> str:
    """
    CSV text with columns iter, z_0..z_{n-1}, resid, envelope.
    """
    header = ["iter"] + ["z_%d" % i for i in range(dim)] + ["resid", "envelope"]
    rows = ([str(r.iteration)] + [format_float(v) for v in r.z] + [format_float(r.residual), format_float(r.envelope)]
            for r in trajectory.records)
    return _csv_text(header, rows)


def write_trajectory_csv(path: str, trajectory, dim: int) -> None:
    atomic_write_text(path, trajectory_csv(trajectory, dim))


def write_envelope_csv(path: str, grid: list, values: list, grad_norms: list) -> None:
    """
    Envelope grid CSV with columns z_0[, z_1], envelope, grad_norm.
    """
    dim = len(grid[0]) if grid else 1
    header = ["z_%d" % i for i in range(dim)] + ["envelope", "grad_norm"]
    rows = ([format_float(c) for c in z] + [format_float(v), format_float(g)]
            for z, v, g in zip(grid, values, grad_norms))
    atomic_write_text(path, _csv_text(header, rows))


def write_trials_csv(path: str, results: list, dim: int) -> None:
    """
    Per-trial Monte-Carlo CSV.
    """
    header = ["trial"] + ["z0_%d" % i for i in range(dim)] + ["label", "index"] + \
             ["x_%d" % i for i in range(dim)] + ["iterations", "resid"]
    rows = []
    for r in results:
        x_final = r.x_final if r.x_final is not None else [None] * dim
        rows.append([str(r.trial)] + [format_float(v) for v in r.z0] + [r.label, "" if r.index is None else r.index] +
                    [format_float(v) for v in x_final] + [str(r.iterations), format_float(r.residual)])
    atomic_write_text(path, _csv_text(header, rows))


def read_trajectory_csv(path: str) -> list:
    """
    Read a trajectory CSV back as a list of dicts of floats (iter as int).
    """
    with open(path, "r", newline="") as f:
        rows = []
        for row in csv.DictReader(f):
            parsed = {k: (float(v) if v != "" else None) for k, v in row.items()}
            parsed["iter"] = int(row["iter"])
            rows.append(parsed)
    return rows
