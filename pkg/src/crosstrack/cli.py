"""Command line front end.

Subcommands:
    sim     generate scenario sequences (random suites or scripted cases)
    track   run the tracker over exported sequence directories
    eval    score tracking output against ground truth
    ablate  run the tracker under cumulative correction-case masks

Every run that writes a directory also writes a ``manifest.json`` recording
the exact inputs, so identical invocations produce identical bytes.  Set
``CROSSTRACK_LOG=DEBUG`` (or any logging level name) for progress chatter
on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Tuple

from .affinity import (
    EmbeddingCosine,
    FileScores,
    OracleSimilarity,
    SimilarityProvider,
    ZeroSimilarity,
    load_embeddings,
)
from .core import TrackerConfig, default_config
from . import kitti_io
from .metrics import aggregate_reports, clear_mot, report_kv, report_text
from .sim import _SCRIPTED_CASES, FaultSpec, generate, scripted_case
from .tracker import CaseMask, track_sequence

log = logging.getLogger("crosstrack")

VERSION = "0.1.0"
PROVIDERS = ("oracle", "file", "embed", "zero")


class CalibrationNotFound(Exception):
    """Raised when a sequence directory has no calib.txt; exits with code 2."""


# -- shared helpers -----------------------------------------------------------

def _require_calib(seq_dir: str) -> str:
    path = os.path.join(seq_dir, "calib.txt")
    if not os.path.isfile(path):
        raise CalibrationNotFound(path)
    return path


def _looks_like_sequence(path: str) -> bool:
    names = ("calib.txt", "dets_lidar.txt", "meta.txt")
    return any(os.path.isfile(os.path.join(path, n)) for n in names)


def _discover_sequences(root: str, wanted: Optional[List[str]] = None) -> List[Tuple[str, str]]:
    """(name, directory) pairs: either ``root`` itself or its subdirectories."""
    if not os.path.isdir(root):
        raise ValueError(f"input directory not found: {root}")
    if _looks_like_sequence(root):
        _require_calib(root)
        seqs = [(os.path.basename(os.path.normpath(root)), root)]
    else:
        seqs = []
        for name in sorted(os.listdir(root)):
            p = os.path.join(root, name)
            if os.path.isdir(p) and _looks_like_sequence(p):
                _require_calib(p)
                seqs.append((name, p))
        if not seqs:
            raise ValueError(f"no sequence directories under {root}")
    if wanted:
        by_name = dict(seqs)
        missing = [w for w in wanted if w not in by_name]
        if missing:
            raise ValueError(f"sequences not found under {root}: {missing}")
        seqs = [(w, by_name[w]) for w in wanted]
    return seqs


def _per_sequence_path(path: str, seq_name: str) -> str:
    return os.path.join(path, f"{seq_name}.txt") if os.path.isdir(path) else path


def _build_providers(
    provider: str,
    seq_name: str,
    seq_dir: str,
    scores: Optional[str],
    embeddings: Optional[str],
) -> Tuple[SimilarityProvider, Optional[Dict[str, tuple]]]:
    """The provider for both streams, plus an embedding table to attach."""
    if provider == "zero":
        return ZeroSimilarity(), None
    if provider == "oracle":
        detmap = os.path.join(seq_dir, "detmap.txt")
        if not os.path.isfile(detmap):
            raise ValueError(f"oracle provider needs {detmap}")
        return OracleSimilarity(kitti_io.load_detmap(detmap)), None
    if provider == "file":
        if not scores:
            raise ValueError("--provider file needs --scores")
        return FileScores.from_path(_per_sequence_path(scores, seq_name)), None
    if provider == "embed":
        if not embeddings:
            raise ValueError("--provider embed needs --embeddings")
        table = load_embeddings(_per_sequence_path(embeddings, seq_name))
        return EmbeddingCosine(), table
    raise ValueError(f"unknown provider {provider!r}")


def _attach_embeddings(frames: List[List], table: Dict[str, tuple]) -> List[List]:
    out = []
    for dets in frames:
        out.append([
            dataclasses.replace(d, embedding=table[d.det_id]) if d.det_id in table else d
            for d in dets
        ])
    return out


def _load_inputs(seq_dir: str):
    calib = kitti_io.load_calibration(_require_calib(seq_dir))
    n_frames = kitti_io.load_meta(os.path.join(seq_dir, "meta.txt"))
    lidar = kitti_io.frames_to_list(
        kitti_io.load_detections_3d(os.path.join(seq_dir, "dets_lidar.txt")), n_frames
    )
    cam_path = os.path.join(seq_dir, "dets_camera.txt")
    camera = None
    if os.path.isfile(cam_path):
        camera = kitti_io.frames_to_list(kitti_io.load_detections_2d(cam_path), n_frames)
    return calib, camera, lidar


def _track_job(args: tuple) -> str:
    """Run one sequence end to end; top level so a process pool can pickle it."""
    seq_name, seq_dir, out_path, cfg, mask, provider, scores, embeddings = args
    calib, camera, lidar = _load_inputs(seq_dir)
    prov, emb_table = _build_providers(provider, seq_name, seq_dir, scores, embeddings)
    if emb_table is not None:
        lidar = _attach_embeddings(lidar, emb_table)
        if camera is not None:
            camera = _attach_embeddings(camera, emb_table)
    if camera is None and not mask.lidar_only:
        log.info("%s: no camera detections, falling back to lidar-only", seq_name)
        mask = CaseMask.baseline()
    outputs = track_sequence(camera, lidar, calib, prov, prov, cfg, mask)
    kitti_io.save_tracking(outputs, out_path)
    return seq_name


def _run_jobs(jobs: List[tuple], n_workers: int) -> None:
    if n_workers <= 1 or len(jobs) <= 1:
        for j in jobs:
            _track_job(j)
            log.info("tracked %s", j[0])
        return
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        for name in pool.map(_track_job, jobs):
            log.info("tracked %s", name)


def _config_dict(cfg: TrackerConfig) -> Dict[str, float]:
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def _write_manifest(out_dir: str, payload: dict) -> None:
    payload = dict(payload, tool="crosstrack", version=VERSION)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    kitti_io._write_text(os.path.join(out_dir, "manifest.json"), text)


def _load_cfg(path: Optional[str]) -> TrackerConfig:
    return kitti_io.load_config(path) if path else default_config()


def _parse_mask(cases: str, lidar_only: bool) -> CaseMask:
    if lidar_only:
        return CaseMask.baseline()
    return CaseMask.from_letters(cases)


# -- subcommands --------------------------------------------------------------

def cmd_sim(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.case:
        names = list(_SCRIPTED_CASES) if args.case == "all" else [args.case]
        for name in names:
            kitti_io.export_scenario(scripted_case(name), os.path.join(args.out, name))
            log.info("wrote scripted case %s", name)
        seq_names = names
    else:
        seq_names = []
        for i in range(args.sequences):
            spec = FaultSpec(
                p_miss_cam=args.p_miss_cam,
                p_miss_lidar=args.p_miss_lidar,
                p_miss_both=args.p_miss_both,
                p_false_cam=args.p_false_cam,
                p_false_lidar=args.p_false_lidar,
                pos_noise_px=args.noise_px,
                pos_noise_m=args.noise_m,
                seed=args.seed + i,
            )
            name = f"{i:04d}"
            scn = generate(args.objects, args.frames, spec)
            kitti_io.export_scenario(scn, os.path.join(args.out, name))
            seq_names.append(name)
            log.info("wrote sequence %s", name)
    _write_manifest(args.out, {
        "command": "sim",
        "case": args.case,
        "sequences": seq_names,
        "objects": args.objects,
        "frames": args.frames,
        "seed": args.seed,
        "p_miss_cam": args.p_miss_cam,
        "p_miss_lidar": args.p_miss_lidar,
        "p_miss_both": args.p_miss_both,
        "p_false_cam": args.p_false_cam,
        "p_false_lidar": args.p_false_lidar,
        "noise_px": args.noise_px,
        "noise_m": args.noise_m,
    })
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args.config)
    mask = _parse_mask(args.cases, args.lidar_only)
    seqs = _discover_sequences(args.input, args.sequences)
    os.makedirs(args.out, exist_ok=True)
    jobs = [
        (name, seq_dir, os.path.join(args.out, f"{name}.txt"),
         cfg, mask, args.provider, args.scores, args.embeddings)
        for name, seq_dir in seqs
    ]
    _run_jobs(jobs, args.jobs)
    _write_manifest(args.out, {
        "command": "track",
        "input": args.input,
        "sequences": [name for name, _ in seqs],
        "cases": mask.letters(),
        "provider": args.provider,
        "scores": args.scores,
        "embeddings": args.embeddings,
        "seed": args.seed,
        "config": _config_dict(cfg),
    })
    print(f"tracked {len(seqs)} sequence(s) -> {args.out}")
    return 0


def _eval_pairs(gt_path: str, hyp_path: str) -> List[Tuple[str, str, str]]:
    """(name, gt file, hyp file) triples for every sequence to score."""
    if os.path.isfile(gt_path):
        if not os.path.isfile(hyp_path):
            raise ValueError(f"hypothesis file not found: {hyp_path}")
        return [("all", gt_path, hyp_path)]
    direct = os.path.join(gt_path, "gt.txt")
    if os.path.isfile(direct):
        name = os.path.basename(os.path.normpath(gt_path))
        hyp = hyp_path if os.path.isfile(hyp_path) else os.path.join(hyp_path, f"{name}.txt")
        return [(name, direct, hyp)]
    pairs = []
    for name in sorted(os.listdir(gt_path)):
        g = os.path.join(gt_path, name, "gt.txt")
        if os.path.isfile(g):
            pairs.append((name, g, os.path.join(hyp_path, f"{name}.txt")))
    if not pairs:
        raise ValueError(f"no gt.txt files under {gt_path}")
    return pairs


def _eval_suite(gt_path: str, hyp_path: str, iou: float):
    reports = []
    for name, gt_file, hyp_file in _eval_pairs(gt_path, hyp_path):
        if not os.path.isfile(hyp_file):
            raise ValueError(f"hypothesis file not found: {hyp_file}")
        gt_frames = kitti_io.tracking_frames_2d(kitti_io.load_gt(gt_file))
        hyp_frames = kitti_io.tracking_frames_2d(kitti_io.load_tracking(hyp_file))
        reports.append((name, clear_mot(gt_frames, hyp_frames, iou)))
    return reports


def cmd_eval(args: argparse.Namespace) -> int:
    reports = _eval_suite(args.gt, args.hyp, args.iou)
    if len(reports) > 1:
        for name, rep in reports:
            print(f"{name}: mota {rep.mota:.4f}  fp {rep.fp}  fn {rep.fn}  idsw {rep.idsw}")
        print()
    total = aggregate_reports([rep for _, rep in reports])
    print(report_text(total))
    if args.out:
        kitti_io._write_text(args.out, report_kv(total) + "\n")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load_cfg(args.config)
    labels = [m.strip() for m in args.masks.split(",") if m.strip()]
    if not labels:
        raise ValueError("no masks given")
    masks = {}
    for label in labels:
        masks[label] = CaseMask.baseline() if label == "baseline" else CaseMask.from_letters(label)

    seqs = _discover_sequences(args.input, args.sequences)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for label in labels:
        sub = os.path.join(args.out, label)
        os.makedirs(sub, exist_ok=True)
        jobs = [
            (name, seq_dir, os.path.join(sub, f"{name}.txt"),
             cfg, masks[label], args.provider, None, None)
            for name, seq_dir in seqs
        ]
        _run_jobs(jobs, args.jobs)
        reports = _eval_suite(args.input, sub, args.iou)
        total = aggregate_reports([rep for _, rep in reports])
        rows.append((label, total))
        log.info("mask %-8s mota %.4f", label, total.mota)

    header = f"{'mask':10s} {'MOTA':>8s} {'FP':>6s} {'FN':>6s} {'IDSW':>6s} {'FRAG':>6s}"
    print(header)
    lines = []
    for label, rep in rows:
        print(f"{label:10s} {rep.mota:8.4f} {rep.fp:6d} {rep.fn:6d} {rep.idsw:6d} {rep.frag:6d}")
        lines.append(f"{label} {rep.mota:.6f} {rep.fp} {rep.fn} {rep.idsw} {rep.frag}")
    kitti_io._write_text(os.path.join(args.out, "ablation.txt"), "".join(l + "\n" for l in lines))
    _write_manifest(args.out, {
        "command": "ablate",
        "input": args.input,
        "sequences": [name for name, _ in seqs],
        "masks": labels,
        "provider": args.provider,
        "iou": args.iou,
        "config": _config_dict(cfg),
    })
    return 0


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crosstrack", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"crosstrack {VERSION}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sim", help="generate scenario sequences")
    ps.add_argument("--out", required=True, help="suite directory to create")
    ps.add_argument("--sequences", type=int, default=1, help="number of random sequences")
    ps.add_argument("--objects", type=int, default=5)
    ps.add_argument("--frames", type=int, default=100)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--p-miss-cam", type=float, default=0.0)
    ps.add_argument("--p-miss-lidar", type=float, default=0.0)
    ps.add_argument("--p-miss-both", type=float, default=0.0)
    ps.add_argument("--p-false-cam", type=float, default=0.0)
    ps.add_argument("--p-false-lidar", type=float, default=0.0)
    ps.add_argument("--noise-px", type=float, default=0.0)
    ps.add_argument("--noise-m", type=float, default=0.0)
    ps.add_argument("--case", choices=list(_SCRIPTED_CASES) + ["all"],
                    help="write a scripted correction case instead of random scenes")
    ps.set_defaults(func=cmd_sim)

    pt = sub.add_parser("track", help="run the tracker over sequences")
    pt.add_argument("input", help="sequence directory or suite of them")
    pt.add_argument("--out", required=True)
    pt.add_argument("--sequences", nargs="*", help="subset of sequence names")
    pt.add_argument("--config", help="tracker config file (key value lines)")
    pt.add_argument("--cases", default="abcde",
                    help="correction cases to enable, e.g. 'abcde', 'ad', 'none'")
    pt.add_argument("--lidar-only", action="store_true",
                    help="single-stream baseline; ignores --cases")
    pt.add_argument("--provider", choices=PROVIDERS, default="oracle")
    pt.add_argument("--scores", help="score table file or directory (provider=file)")
    pt.add_argument("--embeddings", help="embedding file or directory (provider=embed)")
    pt.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    pt.add_argument("--jobs", type=int, default=1, help="parallel sequence workers")
    pt.set_defaults(func=cmd_track)

    pe = sub.add_parser("eval", help="score tracking output against ground truth")
    pe.add_argument("--gt", required=True, help="gt.txt, sequence dir, or suite dir")
    pe.add_argument("--hyp", required=True, help="tracking file or directory of them")
    pe.add_argument("--iou", type=float, default=0.5)
    pe.add_argument("--out", help="write key-value report here")
    pe.set_defaults(func=cmd_eval)

    pa = sub.add_parser("ablate", help="compare cumulative correction-case masks")
    pa.add_argument("input", help="suite directory with per-sequence gt")
    pa.add_argument("--out", required=True)
    pa.add_argument("--sequences", nargs="*")
    pa.add_argument("--config")
    pa.add_argument("--masks", default="baseline,none,a,ab,abc,abcd,abcde")
    pa.add_argument("--provider", choices=PROVIDERS, default="oracle")
    pa.add_argument("--iou", type=float, default=0.5)
    pa.add_argument("--jobs", type=int, default=1)
    pa.set_defaults(func=cmd_ablate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("CROSSTRACK_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CalibrationNotFound as exc:
        print(f"error: calibration file not found: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
