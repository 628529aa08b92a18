"""File formats: measure specs (JSON), grid binaries, report documents.

The binary container is shared by kernel matrices and bound vectors:
a little-endian header (M as int64, R as float64, RM as int64) followed by
row-major float64 payload.  Measure files carry full-precision weights and
are re-validated through the constructor on load.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .dual import BoundReport, BoundVector
from .kernels import PsiMatrix
from .measures import RadialMeasure

_HEADER = struct.Struct("<qdq")


def save_measure(path, m: RadialMeasure) -> None:
    doc = {"K": m.K, "delta": m.delta_weight, "weights": list(map(float, m.weights))}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_measure(path) -> RadialMeasure:
    doc = json.loads(Path(path).read_text())
    weights = np.asarray(doc["weights"], dtype=float)
    return RadialMeasure(
        K=int(doc["K"]), delta_weight=float(doc.get("delta", 0.0)), weights=weights
    )


def _write_grid(path, M: int, R: float, values: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(M, float(R), values.shape[0]))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def _read_grid(path):
    with open(path, "rb") as fh:
        M, R, rm = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return M, R, rm, data


def save_psi_matrix(path, psi: PsiMatrix) -> None:
    _write_grid(path, psi.M, psi.R, psi.values)


def load_psi_matrix(path) -> PsiMatrix:
    M, R, rm, data = _read_grid(path)
    if data.size != rm * rm:
        raise ValueError(f"corrupt kernel file: expected {rm * rm} values")
    return PsiMatrix(M=M, R=R, values=data.reshape(rm, rm).copy())


def save_bound_vector(path, F: BoundVector) -> None:
    _write_grid(path, F.M, F.R, F.values)


def load_bound_vector(path) -> BoundVector:
    M, R, rm, data = _read_grid(path)
    if data.size != rm:
        raise ValueError(f"corrupt vector file: expected {rm} values")
    return BoundVector(M=M, R=R, values=data.copy())


def report_to_dict(report: BoundReport) -> dict:
    return dataclasses.asdict(report)


def save_report(path, report: BoundReport, manifest: dict) -> None:
    doc = {"report": report_to_dict(report), "manifest": manifest}
    Path(path).write_text(json.dumps(doc, indent=1))
