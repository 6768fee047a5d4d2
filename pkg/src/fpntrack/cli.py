"""Command-line interface: synth, solve-template, attend, track, eval, gradcheck.

Exit codes: 0 success, 1 user error, 2 internal error. Diagnostics go to
stderr; machine-readable output goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import container, metrics, synth, templates
from .attention import similarity_pyramid
from .errors import FpnTrackError, UsageError
from .pyramid import BoundingBox, FeatureMap, FeaturePyramid, extract_template
from .synth import SceneObject, SceneSpec, philox
from .scenarios import correlated_identities, linear_trajectory
from .tracker import Detection, TrackerConfig, run_track


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _parse_box(text: str) -> BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"box must be 'x,y,w,h', got {text!r}")
    try:
        return BoundingBox(*[float(p) for p in parts])
    except ValueError as exc:
        raise UsageError(f"bad box {text!r}: {exc}") from exc


def scene_from_json(doc: dict) -> SceneSpec:
    """Build a SceneSpec from its JSON description.

    Schema:
      {"image_size": [H, W], "num_frames": N, "depth": D, "seed": S,
       "noise_sigma": s, "distractor_overlap": o,
       "objects": [{"start": [x, y, w, h], "velocity": [vx, vy],
                    "is_target": bool, "absent_frames": [f, ...]}, ...]}
    """
    try:
        height, width = doc["image_size"]
        num_frames = int(doc["num_frames"])
        obj_docs = doc["objects"]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad scene description: {exc}") from exc
    depth = int(doc.get("depth", 16))
    seed = int(doc.get("seed", 0))
    overlap = float(doc.get("distractor_overlap", 0.0))
    target_id, distractor_id = correlated_identities(depth, overlap, seed)
    rng = philox(seed, stream=2)
    objects = []
    for obj in obj_docs:
        start = BoundingBox(*[float(v) for v in obj["start"]])
        vx, vy = obj.get("velocity", [0.0, 0.0])
        is_target = bool(obj.get("is_target", False))
        if is_target:
            identity = target_id
        elif overlap > 0:
            identity = distractor_id
        else:
            identity = rng.normal(size=depth)
            identity /= np.linalg.norm(identity)
        objects.append(
            SceneObject(
                identity=identity,
                trajectory=linear_trajectory(
                    start, float(vx), float(vy), absent=obj.get("absent_frames", ())
                ),
                is_target=is_target,
            )
        )
    return SceneSpec(
        image_height=int(height),
        image_width=int(width),
        num_frames=num_frames,
        objects=objects,
        noise_sigma=float(doc.get("noise_sigma", 0.0)),
        distractor_overlap=overlap,
        seed=seed,
    )


def cmd_synth(args) -> int:
    doc = json.loads(Path(args.scene).read_text())
    spec = scene_from_json(doc)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = []
    gt_frames = []
    init_box = None
    for f in range(spec.num_frames):
        pyramid, boxes, masks = synth.render_frame(spec, f)
        pyr_path = out / f"frame_{f:04d}.fpyr"
        container.write_container(pyramid, pyr_path)
        cand_path = out / f"candidates_{f:04d}.json"
        cand_boxes = synth.jittered_boxes(
            boxes, args.jitter, args.candidates_per_object, spec.seed * 100003 + f
        )
        container.save_candidates(cand_boxes, cand_path)
        ti = spec.target_index
        gt = metrics.GroundtruthFrame(
            frame=f, present=boxes[ti] is not None, box=boxes[ti], mask=masks[ti]
        )
        gt_frames.append(gt)
        if init_box is None and boxes[ti] is not None:
            init_box = boxes[ti]
        frames.append(container.ManifestFrame(f, pyr_path, cand_path, gt))
    if init_box is None:
        raise UsageError("target is never visible; cannot set an init box")
    container.save_manifest(container.SequenceManifest(init_box, frames), out / "manifest.json")
    container.write_groundtruth(metrics.GroundtruthSequence(gt_frames), out / "gt.jsonl")
    print(out / "manifest.json")
    return 0


def _template_flags(parser):
    parser.add_argument(
        "--template-mode",
        choices=["center", "mean-pos", "mean-diff", "ridge"],
        default="ridge",
    )
    parser.add_argument("--lambda", dest="lam", type=float, default=0.1)
    parser.add_argument("--negatives", type=int, default=256)
    parser.add_argument("--positives", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--normalize-features", action="store_true")
    parser.add_argument("--balance-levels", action="store_true")


def _build_template(pyramid, box, args):
    return templates.build_template(
        pyramid,
        box,
        args.template_mode.replace("-", "_"),
        lam=args.lam,
        num_negatives=args.negatives,
        num_positives=args.positives,
        seed=args.seed,
        normalize=args.normalize_features,
        balance_levels=args.balance_levels,
    )


def cmd_solve_template(args) -> int:
    pyramid = container.read_container(args.pyramid)
    box = _parse_box(args.box)
    template = _build_template(pyramid, box, args)
    doc = {
        "kind": template.kind,
        "lambda": args.lam,
        "values": [float(v) for v in template.values],
    }
    text = container.stable_json(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_attend(args) -> int:
    pyramid = container.read_container(args.pyramid)
    doc = json.loads(Path(args.template).read_text())
    template = np.asarray(doc["values"], dtype=np.float64)
    if args.mode == "detection":
        sims = [np.ones((fm.height, fm.width)) for fm in pyramid.levels]
    else:
        sims = [s.scores for s in similarity_pyramid(pyramid, template)]
    maps = [
        FeatureMap(fm.level, s[:, :, None]) for fm, s in zip(pyramid.levels, sims)
    ]
    sim_pyramid = FeaturePyramid(
        maps,
        strides=pyramid.strides,
        image_height=pyramid.image_height,
        image_width=pyramid.image_width,
    )
    container.write_container(sim_pyramid, args.out)
    return 0


def cmd_track(args) -> int:
    manifest = container.load_manifest(args.sequence)
    init_box = _parse_box(args.init) if args.init else manifest.init_box
    if not manifest.frames:
        raise UsageError("manifest has no frames")
    init_pyramid = container.read_container(manifest.frames[0].pyramid)
    template = _build_template(init_pyramid, init_box, args)

    frames = []
    for mf in manifest.frames:
        pyramid = container.read_container(mf.pyramid)
        detections: list[Detection] = []
        if mf.candidates is not None:
            for box, conf in container.load_candidates(mf.candidates):
                if conf is None:
                    conf = synth.cosine_confidence(
                        extract_template(pyramid, box), template.values
                    )
                detections.append(Detection(box=box, confidence=conf))
        frames.append(detections)

    config = TrackerConfig(
        alpha=args.alpha,
        alpha_low=args.alpha_low,
        alpha_recover=args.alpha_recover,
        recover_frames=args.recover_frames,
        presence_threshold=args.presence_threshold,
        smoothing_enabled=args.smooth,
    )
    track = run_track(
        [lambda _t, dets=dets: dets for dets in frames],
        init_box,
        init_pyramid,
        config,
        args.template_mode.replace("-", "_"),
        lam=args.lam,
        num_negatives=args.negatives,
        num_positives=args.positives,
        seed=args.seed,
        normalize=args.normalize_features,
        balance_levels=args.balance_levels,
    )
    container.write_tracks(track, args.out)
    return 0


def cmd_eval(args) -> int:
    track = container.read_tracks(args.pred)
    gt = container.read_groundtruth(args.gt)
    if args.protocol == "got":
        ao, sr = metrics.average_overlap(track, gt, args.sr_threshold)
        report = {
            "protocol": "got",
            "ao": ao,
            "sr": sr,
            "sr_threshold": args.sr_threshold,
        }
    elif args.protocol == "oxuva":
        tpr, tnr = metrics.oxuva_rates(track, gt, args.theta, args.iou_threshold)
        fpr, tpr_curve = metrics.roc_curve(track, gt, args.iou_threshold)
        report = {
            "protocol": "oxuva",
            "tpr": tpr,
            "tnr": tnr,
            "gm": metrics.geometric_mean(tpr, tnr),
            "auc": metrics.roc_auc(track, gt, args.iou_threshold),
            "theta": args.theta,
            "iou_threshold": args.iou_threshold,
            "curve": {"fpr": list(fpr), "tpr": list(tpr_curve)},
        }
    elif args.protocol == "ltb35":
        p, r, f, theta = metrics.longterm_prf(track, gt)
        report = {
            "protocol": "ltb35",
            "precision": p,
            "recall": r,
            "f": f,
            "theta": theta,
        }
    else:  # davis
        pred_masks = [e.detection.mask for e in track]
        gt_masks = [g.mask for g in gt]
        if any(m is None for m in pred_masks) or any(m is None for m in gt_masks):
            raise UsageError("davis protocol requires masks on every frame")
        j_mean, j_recall, j_decay = metrics.davis_j(pred_masks, gt_masks)
        report = {
            "protocol": "davis",
            "j_mean": j_mean,
            "j_recall": j_recall,
            "j_decay": j_decay,
            "contour_f": "unavailable",
        }
    text = container.stable_json(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    rng = philox(args.seed, stream=3)
    a = rng.normal(size=(1 + args.negatives, args.dim))
    problem = templates.RegressionProblem.from_samples(a[0], list(a[1:]), args.lam)
    g = rng.normal(size=args.dim)
    analytic = templates.ridge_backward(problem, g)
    numeric = np.zeros_like(a)
    step = args.step
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            plus = a.copy()
            plus[i, j] += step
            minus = a.copy()
            minus[i, j] -= step
            t_plus = templates.solve_ridge(
                templates.RegressionProblem(plus, problem.labels, args.lam)
            ).values
            t_minus = templates.solve_ridge(
                templates.RegressionProblem(minus, problem.labels, args.lam)
            ).values
            numeric[i, j] = float(g @ (t_plus - t_minus)) / (2 * step)
    rel = np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12)
    ok = rel < args.tolerance
    print(f"max relative error: {rel:.3e}")
    print(f"{'PASS' if ok else 'FAIL'} (tolerance {args.tolerance:g})")
    return 0 if ok else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="fpntrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic scene to containers + manifest")
    p.add_argument("--scene", required=True, help="scene description JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--candidates-per-object", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve-template", help="compute a template from a pyramid + box")
    p.add_argument("--pyramid", required=True)
    p.add_argument("--box", required=True, help="x,y,w,h")
    p.add_argument("--out", default=None)
    _template_flags(p)
    p.set_defaults(func=cmd_solve_template)

    p = sub.add_parser("attend", help="dump similarity maps for a pyramid + template")
    p.add_argument("--pyramid", required=True)
    p.add_argument("--template", required=True, help="template JSON from solve-template")
    p.add_argument("--mode", choices=["tracking", "detection"], default="tracking")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("track", help="run the tracker over a sequence manifest")
    p.add_argument("--sequence", required=True, help="manifest JSON")
    p.add_argument("--init", default=None, help="x,y,w,h (defaults to manifest init box)")
    p.add_argument("--out", required=True, help="output tracks JSONL")
    _template_flags(p)
    smooth = p.add_mutually_exclusive_group()
    smooth.add_argument("--smooth", dest="smooth", action="store_true", default=True)
    smooth.add_argument("--no-smooth", dest="smooth", action="store_false")
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--alpha-low", type=float, default=0.1)
    p.add_argument("--alpha-recover", type=float, default=0.3)
    p.add_argument("--recover-frames", type=int, default=30)
    p.add_argument("--presence-threshold", type=float, default=0.3)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="evaluate a track against groundtruth")
    p.add_argument("--pred", required=True, help="tracks JSONL")
    p.add_argument("--gt", required=True, help="groundtruth JSONL")
    p.add_argument("--protocol", choices=["got", "oxuva", "ltb35", "davis"], required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--sr-threshold", type=float, default=0.5)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="check the ridge backward pass vs finite differences")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--negatives", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        if not argv:
            raise UsageError(parser.format_usage())
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError(parser.format_usage())
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (FpnTrackError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
