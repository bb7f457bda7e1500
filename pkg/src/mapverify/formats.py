"""File formats: map JSON, JSON-lines logs and labels, run configs, ROC CSV.

Numbers are written with Python's shortest round-trip ``repr`` so files are
byte-stable. All writers go through a temp file and ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .evaluation import CSV_COLUMNS, FP, TP, LabeledDataset, RocCurve
from .fusion import FusionConfig
from .influence import InfluenceParams
from .mapmodel import BuildingOutline, Lane, MapData, MapError
from .pipeline import DEFAULT_RADIUS, Frame, FrameError, VerifiedFrame
from .state import EgoState, TrackState, validate_covariance


class InputError(ValueError):
    """Malformed input file; the message names the offending location."""


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _num(x) -> float:
    return float(x)


def _pairs(arr) -> list[list[float]]:
    return [[_num(x), _num(y)] for x, y in np.asarray(arr)]


# --- map -------------------------------------------------------------------


def map_to_dict(m: MapData) -> dict:
    buildings = []
    for b in m.buildings:
        entry = {"id": b.id, "ring": _pairs(b.polygon)}
        if b.holes:
            entry["holes"] = [_pairs(h) for h in b.holes]
        buildings.append(entry)
    lanes = [
        {"id": l.id, "road_id": l.road_id, "width": _num(l.width), "centerline": _pairs(l.centerline)}
        for l in m.lanes
    ]
    return {"buildings": buildings, "lanes": lanes}


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise InputError(f"{where}.{key}: expected {kind.__name__ if isinstance(kind, type) else kind}")
    return value


def _coords(value, where: str, min_len: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{where}: expected a list of [x, y] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < min_len:
        raise InputError(f"{where}: expected at least {min_len} [x, y] pairs")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{where}: non-finite coordinate")
    return arr


def map_from_dict(data) -> MapData:
    if not isinstance(data, dict):
        raise InputError("map: top level must be an object")
    buildings = []
    for i, b in enumerate(_require(data, "buildings", "map", list)):
        where = f"map.buildings[{i}]"
        bid = str(_require(b, "id", where))
        ring = _coords(_require(b, "ring", where), f"{where}.ring", 3)
        holes = [_coords(h, f"{where}.holes[{k}]", 3) for k, h in enumerate(b.get("holes", []))]
        buildings.append(BuildingOutline(bid, ring, tuple(holes)))
    lanes = []
    for i, l in enumerate(_require(data, "lanes", "map", list)):
        where = f"map.lanes[{i}]"
        width = _require(l, "width", where)
        if isinstance(width, bool) or not isinstance(width, (int, float)):
            raise InputError(f"{where}.width: expected a number")
        try:
            lanes.append(
                Lane(
                    str(_require(l, "id", where)),
                    _coords(_require(l, "centerline", where), f"{where}.centerline", 2),
                    float(width),
                    str(_require(l, "road_id", where)),
                )
            )
        except MapError as exc:
            raise InputError(f"{where}: {exc}") from None
    try:
        return MapData.build(buildings, lanes)
    except MapError as exc:
        raise InputError(f"map: {exc}") from None


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def load_map(path) -> MapData:
    """Read a map file; overlapping building outlines are merged on load."""
    return map_from_dict(_read_json(path))


def save_map(m: MapData, path) -> None:
    atomic_write(path, _dumps(map_to_dict(m)) + "\n")


# --- logs ------------------------------------------------------------------

STATE_FIELDS = ("x", "y", "v", "a", "phi", "omega")


def _cov_list(cov) -> list[float]:
    return [_num(v) for v in np.asarray(cov).reshape(-1)]


def frame_to_dict(frame: Frame) -> dict:
    ego = frame.ego
    return {
        "timestamp": frame.timestamp,
        "ego": {**{f: _num(getattr(ego, f)) for f in STATE_FIELDS}, "cov": _cov_list(ego.cov)},
        "tracks": [
            {
                "label": t.label,
                **{f: _num(getattr(t, f)) for f in STATE_FIELDS},
                "cov": _cov_list(t.cov),
                "existence": _num(t.existence),
                "class_probs": {k: _num(v) for k, v in t.class_probs.items()},
            }
            for t in frame.tracks
        ],
    }


def _state_values(obj, where):
    out = {}
    for f in STATE_FIELDS:
        v = _require(obj, f, where)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InputError(f"{where}.{f}: expected a finite number")
        out[f] = float(v)
    cov = _require(obj, "cov", where, list)
    if len(cov) != 36:
        raise InputError(f"{where}.cov: expected 36 row-major entries, got {len(cov)}")
    try:
        out["cov"] = np.array(cov, dtype=float).reshape(6, 6)
    except (TypeError, ValueError):
        raise InputError(f"{where}.cov: entries must be numbers") from None
    return out


def frame_from_dict(data, where: str = "frame") -> Frame:
    timestamp = _require(data, "timestamp", where)
    if isinstance(timestamp, bool) or not isinstance(timestamp, (int, float)):
        raise InputError(f"{where}.timestamp: expected a number")
    where = f"{where} (timestamp {timestamp!r})"
    ego_vals = _state_values(_require(data, "ego", where, dict), f"{where}.ego")
    report = validate_covariance(ego_vals["cov"])
    if not report:
        raise InputError(f"{where}: ego covariance invalid: {report.reason}")
    ego = EgoState(**ego_vals, timestamp=timestamp)
    tracks = []
    for i, t in enumerate(_require(data, "tracks", where, list)):
        label = _require(t, "label", f"{where}.tracks[{i}]")
        twhere = f"{where} track {label!r}"
        vals = _state_values(t, twhere)
        report = validate_covariance(vals["cov"])
        if not report:
            raise InputError(f"{twhere}: covariance invalid: {report.reason}")
        existence = _require(t, "existence", twhere)
        probs = t.get("class_probs", {})
        if not isinstance(probs, dict):
            raise InputError(f"{twhere}.class_probs: expected an object")
        try:
            tracks.append(TrackState(label=label, **vals, existence=float(existence), class_probs=dict(probs)))
        except (TypeError, ValueError) as exc:
            raise InputError(f"{twhere}: {exc}") from None
    try:
        return Frame(timestamp, ego, tuple(tracks))
    except FrameError as exc:
        raise InputError(str(exc)) from None


def _iter_jsonl(path):
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None


def load_log(path) -> list[Frame]:
    """Read one frame per line; errors carry the line number."""
    frames = []
    for lineno, record in _iter_jsonl(path):
        try:
            frames.append(frame_from_dict(record))
        except InputError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    return frames


def dump_log(frames: Iterable[Frame]) -> str:
    return "".join(_dumps(frame_to_dict(f)) + "\n" for f in frames)


def save_log(frames: Iterable[Frame], path) -> None:
    atomic_write(path, dump_log(frames))


# --- labels ----------------------------------------------------------------


def save_labels(dataset: LabeledDataset, path) -> None:
    lines = []
    for frame, track, truth in dataset.samples():
        record = {"timestamp": frame.timestamp, "label": track.label, "truth": truth}
        info = dataset.meta.get((frame.timestamp, track.label))
        if info is not None:
            record["archetype"] = info.archetype
        lines.append(_dumps(record) + "\n")
    atomic_write(path, "".join(lines))


def load_labels(path) -> dict:
    labels = {}
    for lineno, record in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        truth = _require(record, "truth", where)
        if truth not in (TP, FP):
            raise InputError(f"{where}: truth must be 'TP' or 'FP', got {truth!r}")
        key = (_require(record, "timestamp", where), _require(record, "label", where))
        labels[key] = truth
    return labels


def load_dataset(log_path, labels_path) -> LabeledDataset:
    frames = load_log(log_path)
    try:
        return LabeledDataset(frames, load_labels(labels_path))
    except KeyError as exc:
        raise InputError(f"{labels_path}: {exc.args[0]}") from None


# --- config ----------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    model: str = "iim"
    theta_eta: float = 0.35
    theta_r: float = 0.05
    sigma_b: float = 1.0 / 3.0
    sigma_r: float = 1.0
    w_c: float = 0.1
    radius: float = DEFAULT_RADIUS
    relevant_classes: tuple[str, ...] = FusionConfig.relevant_classes
    cpts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("theta_eta", "theta_r"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        # delegate the remaining checks
        self.influence_params()
        self.fusion_config()

    def influence_params(self) -> InfluenceParams:
        return InfluenceParams(self.sigma_b, self.sigma_r)

    def fusion_config(self, model: str | None = None) -> FusionConfig:
        return FusionConfig(model or self.model, self.w_c, tuple(self.relevant_classes), self.cpts or None)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["relevant_classes"] = list(self.relevant_classes)
        out["cpts"] = {m: {n: list(map(float, t)) for n, t in tables.items()} for m, tables in self.cpts.items()}
        return out


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise InputError("config: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"config: unknown fields {sorted(unknown)}")
    data = dict(data)
    if "relevant_classes" in data:
        data["relevant_classes"] = tuple(data["relevant_classes"])
    cpts = data.get("cpts", {})
    if not isinstance(cpts, dict) or any(m not in ("bn", "bne") for m in cpts):
        raise InputError("config.cpts: expected an object keyed by 'bn' and/or 'bne'")
    try:
        return RunConfig(**data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"config: {exc}") from None


def load_config(path) -> RunConfig:
    return config_from_dict(_read_json(path))


def save_config(config: RunConfig, path) -> None:
    atomic_write(path, _dumps(config.to_dict()) + "\n")


# --- outputs ---------------------------------------------------------------


def verified_to_dict(vf: VerifiedFrame) -> dict:
    return {
        "timestamp": vf.timestamp,
        "entries": [
            {"label": e.label, "eta": e.eta, "kept": e.kept, "influences": e.influences.as_dict()}
            for e in vf.entries
        ],
        "kept": [t.label for t in vf.kept],
    }


def dump_verified(frames: Iterable[VerifiedFrame]) -> str:
    return "".join(_dumps(verified_to_dict(f)) + "\n" for f in frames)


def roc_csv(curve: RocCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for point in curve.points:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in point.row()])
    return buf.getvalue()


def read_roc_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {k: (int(v) if k.endswith(("_kept", "_total")) else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
