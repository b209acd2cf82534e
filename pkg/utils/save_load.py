import csv
import hashlib
import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

from utils.config import BUILD_ID_LENGTH
from utils.errors import DataError
from utils.types import CurveOutput

logger = logging.getLogger(__name__)

PACKAGE_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SOURCE_PACKAGES = ("core", "systems", "states", "utils")

MEASUREMENT_COLUMNS = ("delta_t_s", "p_up")
OPTIONAL_MEASUREMENT_COLUMNS = ("p_up_sigma", "omega_t_opt")


def ensure_folder(path: str):
    """Create the parent directory of an output file if it doesn't already exist."""
    folder = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(folder):
        os.makedirs(folder)


def format_float(value) -> str:
    """Shortest round-trip decimal of a float."""
    return repr(float(value))


def build_id() -> str:
    """git-style short id: SHA-1 over the package sources in a fixed order."""
    digest = hashlib.sha1()
    for package in SOURCE_PACKAGES:
        folder = os.path.join(PACKAGE_ROOT, package)
        if not os.path.isdir(folder):
            continue
        for filename in sorted(os.listdir(folder)):
            if filename.endswith(".py"):
                digest.update(f"{package}/{filename}".encode("utf-8"))
                with open(os.path.join(folder, filename), "rb") as f:
                    digest.update(f.read())
    return digest.hexdigest()[:BUILD_ID_LENGTH]


def write_json(data: dict, path: str):
    """Write a JSON document with sorted keys; no timestamps, so reruns are byte-identical."""
    ensure_folder(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def write_rows(header: Sequence[str], rows: Sequence[Sequence], path: str):
    """Write a CSV table with a header row; floats are formatted with format_float."""
    ensure_folder(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def sidecar_path(path: str) -> str:
    return path + ".meta.json"


def write_curve(output: CurveOutput, path: str):
    """
    Write a curve table and its metadata sidecar.

    An existing sidecar is compared first: a matching config hash must
    reproduce the same bytes, a different one is replaced with a warning.

    Args:
        output: Curve to write
        path: CSV destination

    Returns:
        bool: True if a previous output of the same configuration was reproduced exactly
    """
    previous = _previous_output(path)
    header = [output.variable] + list(output.series)
    rows = [
        [output.values[i]] + [output.series[name][i] for name in output.series]
        for i in range(len(output.values))
    ]
    write_rows(header, rows, path)
    write_json(output.metadata, sidecar_path(path))
    return _verify_rerun(previous, output.metadata, path)


def _previous_output(path: str) -> Optional[dict]:
    meta = sidecar_path(path)
    if not (os.path.exists(path) and os.path.exists(meta)):
        return None
    try:
        with open(meta, "r", encoding="utf-8") as f:
            metadata = json.load(f)
        with open(path, "rb") as f:
            content = f.read()
    except (OSError, json.JSONDecodeError):
        return None
    return {"metadata": metadata, "content": content}


def _verify_rerun(previous: Optional[dict], metadata: dict, path: str) -> bool:
    if previous is None:
        return False
    old_hash = previous["metadata"].get("config_hash")
    if old_hash != metadata.get("config_hash"):
        logger.warning("%s replaced output of a different configuration (%s)", path, old_hash)
        return False
    with open(path, "rb") as f:
        reproduced = f.read() == previous["content"]
    if reproduced:
        logger.info("%s reproduced byte-identical output for config %s", path, old_hash[:BUILD_ID_LENGTH])
    else:
        logger.warning("%s differs from the previous run of the same configuration", path)
    return reproduced


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise DataError(e.strerror, path) from None
    except json.JSONDecodeError as e:
        raise DataError(e.msg, path, e.lineno) from None


def read_measurements(path: str) -> Dict[str, np.ndarray]:
    """
    Read a measurement table.

    Args:
        path: CSV with columns delta_t_s, p_up and optionally p_up_sigma, omega_t_opt

    Returns:
        dict: Column name to array, rows sorted by delay; optional columns only when present
    """
    if not os.path.exists(path):
        raise DataError("file not found", path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        for column in MEASUREMENT_COLUMNS:
            if column not in fields:
                raise DataError(f"missing column {column!r}", path, 1)
        columns = [c for c in MEASUREMENT_COLUMNS + OPTIONAL_MEASUREMENT_COLUMNS if c in fields]
        values: Dict[str, List[float]] = {c: [] for c in columns}
        for row in reader:
            for column in columns:
                try:
                    values[column].append(float(row[column]))
                except (TypeError, ValueError):
                    raise DataError(f"cannot parse {column}={row[column]!r}", path, reader.line_num) from None
    if not values["delta_t_s"]:
        raise DataError("no data rows", path)
    order = np.argsort(values["delta_t_s"], kind="stable")
    return {c: np.asarray(v)[order] for c, v in values.items()}


def read_rate_table(path: str) -> Dict[str, np.ndarray]:
    """Read a two-column CSV of axial frequencies (omega_hz) and heating rates (heating_rate_per_s)."""
    if not os.path.exists(path):
        raise DataError("file not found", path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for column in ("omega_hz", "heating_rate_per_s"):
            if column not in (reader.fieldnames or []):
                raise DataError(f"missing column {column!r}", path, 1)
        omegas, rates = [], []
        for row in reader:
            try:
                omegas.append(float(row["omega_hz"]))
                rates.append(float(row["heating_rate_per_s"]))
            except (TypeError, ValueError):
                raise DataError("cannot parse row", path, reader.line_num) from None
    return {"omega_hz": np.asarray(omegas), "heating_rate_per_s": np.asarray(rates)}
