"""On-disk formats: pyramid containers, sequence manifests, track/gt JSONL.

A pyramid container is a single-line JSON header terminated by a newline,
followed by a raw little-endian float32 payload. Byte offsets in the
header are relative to the start of the payload. Unknown header keys are
ignored for forward compatibility.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ContainerError, InvalidInputError
from .pyramid import BoundingBox, FeatureMap, FeaturePyramid, Mask
from .tracker import Detection, Track, TrackEntry
from .metrics import GroundtruthFrame, GroundtruthSequence

CONTAINER_VERSION = 1


def pyramid_to_bytes(pyramid: FeaturePyramid) -> bytes:
    records = []
    chunks = []
    offset = 0
    for fm, stride in zip(pyramid.levels, pyramid.strides):
        raw = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
        records.append(
            {
                "level": fm.level,
                "height": fm.height,
                "width": fm.width,
                "depth": fm.depth,
                "dtype": "f32",
                "stride": stride,
                "byte_offset": offset,
                "byte_length": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    header = {
        "version": CONTAINER_VERSION,
        "image_size": [pyramid.image_height, pyramid.image_width],
        "levels": records,
    }
    return json.dumps(header, separators=(",", ":")).encode() + b"\n" + b"".join(chunks)


def pyramid_from_bytes(buf: bytes) -> FeaturePyramid:
    newline = buf.find(b"\n")
    if newline < 0:
        raise ContainerError("no header terminator found in first bytes of container")
    try:
        header = json.loads(buf[:newline].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"malformed container header: {exc}") from exc
    if not isinstance(header, dict) or "levels" not in header:
        raise ContainerError("container header missing 'levels'")
    payload = buf[newline + 1 :]
    records = header["levels"]
    spans = []
    for rec in records:
        try:
            h, w, d = int(rec["height"]), int(rec["width"]), int(rec["depth"])
            off, length = int(rec["byte_offset"]), int(rec["byte_length"])
            level = int(rec["level"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ContainerError(f"bad level record {rec!r}: {exc}") from exc
        if rec.get("dtype", "f32") != "f32":
            raise ContainerError(f"unsupported dtype {rec.get('dtype')!r}")
        if length != h * w * d * 4:
            raise ContainerError(
                f"level {level}: declared byte_length {length} != {h}x{w}x{d}x4"
            )
        if off < 0 or off + length > len(payload):
            raise ContainerError(
                f"level {level}: payload truncated, need bytes [{off}, {off + length}) "
                f"but payload has {len(payload)} bytes"
            )
        spans.append((off, off + length, level))
    spans.sort()
    for (s0, e0, l0), (s1, e1, l1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise ContainerError(
                f"levels {l0} and {l1} declare overlapping byte ranges "
                f"[{s0}, {e0}) and [{s1}, {e1})"
            )
    maps = []
    strides = []
    for rec in records:
        h, w, d = int(rec["height"]), int(rec["width"]), int(rec["depth"])
        off, length = int(rec["byte_offset"]), int(rec["byte_length"])
        arr = np.frombuffer(payload[off : off + length], dtype="<f4").reshape(h, w, d)
        maps.append(FeatureMap(int(rec["level"]), arr.copy()))
        strides.append(int(rec.get("stride", 2 ** int(rec["level"]))))
    image = header.get("image_size")
    ih, iw = (image if isinstance(image, list) and len(image) == 2 else (None, None))
    try:
        return FeaturePyramid(maps, strides=tuple(strides), image_height=ih, image_width=iw)
    except InvalidInputError as exc:
        raise ContainerError(f"container holds an invalid pyramid: {exc}") from exc


def write_container(pyramid: FeaturePyramid, path) -> None:
    Path(path).write_bytes(pyramid_to_bytes(pyramid))


def read_container(path) -> FeaturePyramid:
    return pyramid_from_bytes(Path(path).read_bytes())


def _box_from_list(vals) -> BoundingBox:
    if not isinstance(vals, (list, tuple)) or len(vals) != 4:
        raise ContainerError(f"box must be [x, y, w, h], got {vals!r}")
    return BoundingBox(*[float(v) for v in vals])


def _mask_to_json(mask: Mask) -> dict:
    return {"size": [mask.height, mask.width], "runs": list(mask.runs)}


def _mask_from_json(obj) -> Mask:
    try:
        h, w = obj["size"]
        return Mask(int(h), int(w), tuple(int(r) for r in obj["runs"]))
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        raise ContainerError(f"bad mask record: {exc}") from exc


@dataclass
class ManifestFrame:
    frame: int
    pyramid: Path
    candidates: Optional[Path] = None
    groundtruth: Optional[GroundtruthFrame] = None


@dataclass
class SequenceManifest:
    init_box: BoundingBox
    frames: list[ManifestFrame] = field(default_factory=list)

    def __post_init__(self):
        idx = [f.frame for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ContainerError("manifest frame indices must be strictly increasing")


def save_manifest(manifest: SequenceManifest, path) -> None:
    base = Path(path).parent
    frames = []
    for f in manifest.frames:
        rec = {"frame": f.frame, "pyramid": os.path.relpath(f.pyramid, base)}
        if f.candidates is not None:
            rec["candidates"] = os.path.relpath(f.candidates, base)
        if f.groundtruth is not None:
            g = f.groundtruth
            rec["groundtruth"] = {
                "present": g.present,
                "box": g.box.as_list() if g.box else None,
                "mask": _mask_to_json(g.mask) if g.mask else None,
            }
        frames.append(rec)
    doc = {"init_box": manifest.init_box.as_list(), "frames": frames}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_manifest(path) -> SequenceManifest:
    path = Path(path)
    base = path.parent
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"malformed manifest: {exc}") from exc
    try:
        init_box = _box_from_list(doc["init_box"])
        raw_frames = doc["frames"]
    except KeyError as exc:
        raise ContainerError(f"manifest missing key {exc}") from exc
    frames = []
    for rec in raw_frames:
        pyr = base / rec["pyramid"]
        if not pyr.exists():
            raise ContainerError(f"manifest references missing pyramid {pyr}")
        cand = None
        if rec.get("candidates"):
            cand = base / rec["candidates"]
            if not cand.exists():
                raise ContainerError(f"manifest references missing candidates {cand}")
        gt = None
        if rec.get("groundtruth") is not None:
            g = rec["groundtruth"]
            gt = GroundtruthFrame(
                frame=int(rec["frame"]),
                present=bool(g.get("present", False)),
                box=_box_from_list(g["box"]) if g.get("box") else None,
                mask=_mask_from_json(g["mask"]) if g.get("mask") else None,
            )
        frames.append(ManifestFrame(int(rec["frame"]), pyr, cand, gt))
    return SequenceManifest(init_box, frames)


def save_candidates(boxes, path, confidences=None) -> None:
    records = []
    for i, box in enumerate(boxes):
        rec = {"box": box.as_list()}
        if confidences is not None:
            rec["confidence"] = float(confidences[i])
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def load_candidates(path) -> list[tuple[BoundingBox, Optional[float]]]:
    try:
        records = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"malformed candidates file: {exc}") from exc
    out = []
    for rec in records:
        conf = rec.get("confidence")
        out.append((_box_from_list(rec["box"]), None if conf is None else float(conf)))
    return out


def write_tracks(track: Track, path) -> None:
    with open(path, "w") as fh:
        for entry in track:
            rec = {
                "frame": entry.frame,
                "box": entry.detection.box.as_list(),
                "confidence": entry.detection.confidence,
                "present": entry.present,
            }
            if entry.detection.mask is not None:
                rec["mask"] = _mask_to_json(entry.detection.mask)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_tracks(path) -> Track:
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ContainerError(f"{path}:{lineno}: malformed track record: {exc}") from exc
        mask = _mask_from_json(rec["mask"]) if rec.get("mask") else None
        det = Detection(
            box=_box_from_list(rec["box"]),
            confidence=float(rec["confidence"]),
            mask=mask,
        )
        entries.append(TrackEntry(int(rec["frame"]), det, bool(rec["present"])))
    return Track(entries)


def write_groundtruth(gt: GroundtruthSequence, path) -> None:
    with open(path, "w") as fh:
        for g in gt:
            rec = {
                "frame": g.frame,
                "present": g.present,
                "box": g.box.as_list() if g.box else None,
            }
            if g.mask is not None:
                rec["mask"] = _mask_to_json(g.mask)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_groundtruth(path) -> GroundtruthSequence:
    frames = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ContainerError(f"{path}:{lineno}: malformed groundtruth: {exc}") from exc
        frames.append(
            GroundtruthFrame(
                frame=int(rec["frame"]),
                present=bool(rec["present"]),
                box=_box_from_list(rec["box"]) if rec.get("box") else None,
                mask=_mask_from_json(rec["mask"]) if rec.get("mask") else None,
            )
        )
    return GroundtruthSequence(frames)


def _round_floats(obj, sig: int = 6):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.{sig}g}")
        return obj
    if isinstance(obj, dict):
        return {k: _round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, sig) for v in obj]
    return obj


def stable_json(obj) -> str:
    """Byte-stable JSON: sorted keys, floats at 6 significant digits."""
    return json.dumps(_round_floats(obj), sort_keys=True, indent=2) + "\n"
