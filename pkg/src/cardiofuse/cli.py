"""Batch command-line front-end.

Subcommands: generate, preprocess, select-features, train, evaluate, dca,
run, compare.  Every command takes --config (JSON), --seed, --out-dir;
the CARDIOFUSE_OUT_DIR environment variable overrides the output
directory.  `run` additionally accepts repeated --stage name=on|off
toggles.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline, svg

OUT_DIR_ENV = "CARDIOFUSE_OUT_DIR"

_STAGE_SETS = {
    "preprocess": ("preprocess", "filtering"),
    "select-features": ("preprocess", "filtering", "select_features"),
    "train": ("preprocess", "filtering", "select_features", "train"),
    "evaluate": ("preprocess", "filtering", "select_features", "train",
                 "evaluate"),
    "dca": ("preprocess", "filtering", "select_features", "train", "evaluate",
            "dca"),
}


def _common_config(args) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = pipeline.load_config(args.config, overrides)
    out_dir = os.environ.get(OUT_DIR_ENV) or args.out_dir
    if out_dir:
        cfg["out_dir"] = out_dir
    return cfg


def _run_stages(cfg: dict, enabled: tuple[str, ...]) -> dict:
    cfg = json.loads(json.dumps(cfg))  # private copy
    for name in cfg["stages"]:
        cfg["stages"][name] = name in enabled
    return pipeline.run_all(cfg, cfg["out_dir"])


def cmd_generate(args) -> int:
    cfg = _common_config(args)
    truth = pipeline.stage_generate(cfg, cfg["data_dir"])
    print(f"generated {cfg['data_dir']}: "
          f"{len(truth['corrupted_ids'])} corrupted subjects")
    return 0


def cmd_stage(args) -> int:
    cfg = _common_config(args)
    manifest = _run_stages(cfg, _STAGE_SETS[args.command])
    print(f"completed stages: {[s['name'] for s in manifest['stages']]}")
    return 0


def cmd_run(args) -> int:
    cfg = _common_config(args)
    for toggle in args.stage or []:
        name, _, state = toggle.partition("=")
        name = name.replace("-", "_")
        if name not in cfg["stages"] or state not in ("on", "off"):
            raise SystemExit(f"bad --stage toggle: {toggle!r}")
        cfg["stages"][name] = state == "on"
    try:
        manifest = pipeline.run_all(cfg, cfg["out_dir"])
    except Exception as exc:  # noqa: BLE001 - abort with stage diagnostic
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"completed stages: {[s['name'] for s in manifest['stages']]}")
    return 0


def _load_report(manifest_path: Path) -> tuple[str, list[dict]]:
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    seg_path = manifest["artifacts"].get("segment_metrics")
    if not seg_path:
        raise SystemExit(f"{manifest_path}: manifest lacks an evaluation report")
    segments = json.loads(Path(seg_path).read_text(encoding="utf-8"))
    name = manifest["config"]["fusion"]["strategy"] + ":" + "+".join(
        manifest["config"]["fusion"]["modalities"]
    )
    return name, segments


def cmd_compare(args) -> int:
    rows = []
    for path in args.manifests:
        name, segments = _load_report(Path(path))
        entry = {"name": name}
        for metric in ("auroc", "accuracy", "mcc"):
            values = [seg[metric] for seg in segments]
            entry[metric] = float(np.mean(values))
            entry[metric + "_std"] = (float(np.std(values, ddof=1))
                                      if len(values) >= 2 else 0.0)
        rows.append(entry)
    rows.sort(key=lambda r: -r["auroc"])

    out_dir = Path(os.environ.get(OUT_DIR_ENV) or args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "comparison.csv"
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("name,auroc,auroc_std,accuracy,accuracy_std,mcc,mcc_std\n")
        for r in rows:
            f.write(
                f"{r['name']},{r['auroc']:.6g},{r['auroc_std']:.6g},"
                f"{r['accuracy']:.6g},{r['accuracy_std']:.6g},"
                f"{r['mcc']:.6g},{r['mcc_std']:.6g}\n"
            )
    chart = svg.bar_chart(
        groups=[r["name"] for r in rows],
        series={m: [r[m] for r in rows] for m in ("auroc", "accuracy", "mcc")},
        title="Model comparison", y_label="score",
    )
    svg_path = out_dir / "comparison.svg"
    svg_path.write_text(chart, encoding="utf-8")
    for r in rows:
        print(f"{r['name']}: AUROC {r['auroc']:.4f} +/- {r['auroc_std']:.4f}")
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardiofuse",
        description="Multimodal cardiovascular hemodynamics pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)

    for name in ("generate", "preprocess", "select-features", "train",
                 "evaluate", "dca"):
        p = sub.add_parser(name)
        add_common(p)

    p = sub.add_parser("run", help="execute every enabled stage")
    add_common(p)
    p.add_argument("--stage", action="append", metavar="NAME=on|off",
                   help="toggle a stage, e.g. --stage filtering=off")

    p = sub.add_parser("compare", help="tabulate evaluation reports")
    p.add_argument("manifests", nargs="+", help="manifest.json paths")
    p.add_argument("--out-dir", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "generate":
        return cmd_generate(args)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "compare":
        return cmd_compare(args)
    return cmd_stage(args)


if __name__ == "__main__":
    raise SystemExit(main())
