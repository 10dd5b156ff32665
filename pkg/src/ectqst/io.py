"""File formats: canonical JSON for plans, counts and reports; CSV for curves and tables.

Canonical JSON has sorted keys, floats written with ``%.17g`` and LF line
endings, so equal objects serialize to identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile

import numpy as np

from . import generators as gen
from .errors import TomographyError
from .measurement import MODE_EXACT, MODE_SAMPLED, CountsRecord
from .planner import TomographyPlan, overlap_matrix
from .thresholds import DiagonalMeasurement, TargetElement, ThresholdPolicy

FORMAT_VERSION = 1
CURVE_HEADER = ("l", "fidelity_prev", "fidelity_target")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq):
            return "[" + ", ".join(_encode(x, indent, level + 1) for x in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(x, indent, level + 1) for x in seq) + "\n" + end + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise TomographyError(f"cannot serialize non-finite value {x}")
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj, indent: int = 1) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_atomic(path, text: str):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    write_atomic(path, dumps_canonical(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _require(data: dict, *keys):
    missing = [k for k in keys if k not in data]
    if missing:
        raise TomographyError(f"missing field(s): {', '.join(missing)}")


# plans

def plan_to_dict(plan: TomographyPlan) -> dict:
    return {
        "version": FORMAT_VERSION,
        "d": plan.d,
        "N": plan.N,
        "mas": plan.mas,
        "coverage": plan.coverage,
        "threshold": {"mode": plan.policy, "value": plan.threshold},
        "targets": [{"i": m.i, "j": m.j, "part": m.part, "bound": m.bound} for m in plan.targets],
        "settings": [{"K": list(K), "weight": float(w), "informs": list(inf)}
                     for K, w, inf in zip(plan.settings, plan.weights, plan.informs)],
        "candidates": [list(K) for K in plan.candidates],
        "seed": plan.seed,
    }


def plan_from_dict(data: dict) -> TomographyPlan:
    _require(data, "d", "N", "threshold", "targets", "settings")
    d, N = int(data["d"]), int(data["N"])
    mas = data.get("mas", gen.MAS_IDENTITY)
    targets = [TargetElement(int(t["i"]), int(t["j"]), t["part"], float(t["bound"]))
               for t in data["targets"]]
    settings = [tuple(int(k) for k in s["K"]) for s in data["settings"]]
    if not settings or any(settings[0]):
        raise TomographyError("plan must start with the all-zero diagonal setting")
    if any(len(K) != N for K in settings):
        raise TomographyError("setting length differs from N")
    weights = np.array([float(s["weight"]) for s in data["settings"]])
    if np.any(np.diff(weights[1:]) > 1e-12):
        raise TomographyError("plan weights must be non-increasing after the diagonal")
    candidates = [tuple(int(k) for k in K) for K in data.get("candidates", [])] or settings[1:]
    catalog = gen.build_catalog(d, mas)
    overlap = overlap_matrix(settings, targets, catalog)
    beta = overlap_matrix(candidates, targets, catalog).max(axis=0) if targets else np.zeros(0)
    thr = data["threshold"]
    return TomographyPlan(
        d=d, N=N, threshold=float(thr["value"]), targets=targets, settings=settings,
        weights=weights, informs=[list(s.get("informs", [])) for s in data["settings"]],
        overlap=overlap, beta=beta, candidates=candidates, policy=thr.get("mode", "fixed"),
        coverage=data.get("coverage", "single"), mas=mas, seed=data.get("seed"))


def save_plan(path, plan: TomographyPlan):
    write_json(path, plan_to_dict(plan))


def load_plan(path) -> TomographyPlan:
    return plan_from_dict(read_json(path))


# counts

def counts_to_dict(records, d: int, N: int, *, shots, mode: str, noise=None, seed=None) -> dict:
    exact = mode == MODE_EXACT
    return {
        "version": FORMAT_VERSION,
        "d": d,
        "N": N,
        "shots": shots,
        "mode": mode,
        "noise": None if noise is None else {"epsilon": noise.epsilon,
                                             "bias": None if noise.bias is None else list(noise.bias)},
        "seed": seed,
        "records": [{"K": list(r.setting),
                     "counts": [float(c) for c in r.counts] if exact else [int(c) for c in r.counts]}
                    for r in records],
    }


def counts_from_dict(data: dict) -> tuple[dict, list[CountsRecord]]:
    _require(data, "d", "N", "shots", "records")
    d, N = int(data["d"]), int(data["N"])
    mode = data.get("mode", MODE_SAMPLED)
    shots = float(data["shots"])
    noise = data.get("noise")
    tag = "none" if not noise or not noise.get("epsilon") else f"readout:{noise['epsilon']:g}"
    records = []
    for rec in data["records"]:
        K = tuple(int(k) for k in rec["K"])
        counts = np.asarray(rec["counts"], dtype=float)
        if len(K) != N or counts.shape != (d ** N,):
            raise TomographyError(f"record {K} does not match d={d}, N={N}")
        if mode == MODE_SAMPLED and not np.isclose(counts.sum(), shots):
            raise TomographyError(f"record {K} counts sum to {counts.sum()}, expected {shots}")
        records.append(CountsRecord(K, counts, shots, mode, tag, data.get("seed")))
    meta = {"d": d, "N": N, "shots": shots, "mode": mode, "noise": noise, "seed": data.get("seed")}
    return meta, records


def load_counts(path):
    return counts_from_dict(read_json(path))


def load_diagonal(path, d: int | None = None, N: int | None = None) -> DiagonalMeasurement:
    """Diagonal counts from ``{"d", "N", "shots", "counts"}`` or from a counts file."""
    data = read_json(path)
    d = int(data.get("d", d) if d is None else d)
    N = int(data.get("N", N) if N is None else N)
    if "records" in data:
        _, records = counts_from_dict(data)
        for r in records:
            if not any(r.setting):
                return DiagonalMeasurement(d, N, r.counts, r.shots)
        raise TomographyError("counts file has no diagonal record")
    _require(data, "counts")
    counts = np.asarray(data["counts"], dtype=float)
    shots = float(data.get("shots", counts.sum()))
    return DiagonalMeasurement(d, N, counts, shots, lost_shots=bool(data.get("lost_shots", False)))


def load_calibration(path) -> ThresholdPolicy:
    """``{"shots", "noiseless": [...], "noisy_runs": [[...], ...]}``."""
    data = read_json(path)
    _require(data, "noiseless", "noisy_runs", "shots")
    return ThresholdPolicy("noise", noiseless=tuple(data["noiseless"]),
                           noisy_runs=tuple(tuple(r) for r in data["noisy_runs"]),
                           shots=float(data["shots"]))


def parse_threshold(spec: str) -> ThresholdPolicy:
    """``fixed:<value>``, ``gini``, ``min-nonzero`` or ``noise:<calibration.json>``."""
    kind, _, arg = spec.partition(":")
    if kind == "fixed":
        try:
            return ThresholdPolicy("fixed", value=float(arg))
        except ValueError:
            raise TomographyError(f"bad threshold value in {spec!r}") from None
    if kind in ("gini", "min-nonzero") and not arg:
        return ThresholdPolicy(kind)
    if kind == "noise" and arg:
        return load_calibration(arg)
    raise TomographyError(f"unknown threshold spec {spec!r}")


# reports

def matrix_to_pairs(rho) -> list:
    rho = np.asarray(rho)
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho]


def matrix_from_pairs(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def write_curve_csv(path, curve):
    rows = []
    for l, f_prev, f_tgt in curve:
        rows.append([str(l), "%.6g" % f_prev, "" if f_tgt is None else "%.6g" % f_tgt])
    write_table_csv(path, CURVE_HEADER, rows)


def write_table_csv(path, header, rows):
    import io as _io

    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    write_atomic(path, buf.getvalue())


def read_curve_csv(path) -> list[tuple[int, float, float | None]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [(int(r["l"]), float(r["fidelity_prev"]),
                 float(r["fidelity_target"]) if r["fidelity_target"] else None) for r in reader]
