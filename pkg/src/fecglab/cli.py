"""Command-line interface: generate / train / eval / extract.

Every run writes its fully resolved configuration next to its outputs, so any
result directory is reproducible from its own provenance. Exit codes: 0
success, 2 usage error, 3 data/file error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import report as rp
from .cunet.checkpoint import load_checkpoint, save_checkpoint
from .cunet.extract import extract_fecg
from .cunet.model import CUNet, CUNetConfig
from .cunet.training import TrainConfig, make_examples, train
from .dataset import (
    MANIFEST_NAME,
    RecordConfig,
    generate_dataset,
    load_dataset_record,
    load_manifest,
    load_record,
)
from .errors import FecgLabError, NumericalError, RejectedInput
from .filters import preprocess
from .spectral import StftConfig, stft
from .svgplot import line_plot
from .timeseries import TimeSeries

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

OUTPUT_ROOT_ENV = "FECGLAB_OUT"


def _resolve_out(value: str | None, parser: argparse.ArgumentParser) -> Path:
    if value:
        return Path(value)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root)
    parser.error("--out is required (or set FECGLAB_OUT)")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """File values override defaults; explicit flags override the file."""
    resolved = dict(defaults)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise RejectedInput(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise RejectedInput(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_resolved(out_dir: Path, command: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{command}_config.json").write_text(
        json.dumps({"command": command, **resolved}, indent=2, sort_keys=True)
    )


# -- generate --------------------------------------------------------------------


def cmd_generate(args, parser) -> int:
    out = _resolve_out(args.out, parser)
    defaults = {"records": 120, "seed": 0, "duration_s": 60.0, "full_scale": False}
    cfg = _merge_config(args, defaults)
    if cfg["full_scale"]:
        cfg["records"] = 10_100
    _write_resolved(out, "generate", cfg)
    manifest = generate_dataset(
        cfg["records"], cfg["seed"], out,
        RecordConfig(duration_s=cfg["duration_s"]),
    )
    print(f"wrote {manifest.n_records} records to {out} "
          f"({len(manifest.train_ids)} train / {len(manifest.test_ids)} test)")
    return EXIT_OK


# -- train -----------------------------------------------------------------------


def cmd_train(args, parser) -> int:
    out = _resolve_out(args.out, parser)
    defaults = {
        "dataset": None, "epochs": 10, "lr": 1e-3, "batch_size": 8, "seed": 0,
        "depth": 3, "channels": "8,16,32", "activation": "rho",
        "conv_mode": "split", "max_steps": None, "max_records": None,
    }
    cfg = _merge_config(args, defaults)
    if not cfg["dataset"]:
        parser.error("--dataset is required")
    ds = Path(cfg["dataset"])
    if not (ds / MANIFEST_NAME).exists():
        raise RejectedInput(f"no dataset manifest under {ds}")
    manifest = load_manifest(ds / MANIFEST_NAME)
    _write_resolved(out, "train", cfg)

    stft_cfg = StftConfig()
    examples = []
    train_ids = manifest.train_ids
    if cfg["max_records"] is not None:
        train_ids = train_ids[: cfg["max_records"]]
    for rid in train_ids:
        rec = load_dataset_record(ds, manifest, rid)
        examples.extend(make_examples(preprocess(rec.abdominal), rec.fecg_ref, stft_cfg))

    channels = tuple(int(c) for c in str(cfg["channels"]).split(","))
    f, t = stft(TimeSeries(np.zeros(2048), manifest.fs), stft_cfg).data.shape
    model = CUNet(CUNetConfig(
        n_freqs=f, n_frames=t, depth=cfg["depth"], channels=channels,
        activation=cfg["activation"], conv_mode=cfg["conv_mode"], seed=cfg["seed"],
    ))
    tcfg = TrainConfig(lr=cfg["lr"], batch_size=cfg["batch_size"],
                       epochs=cfg["epochs"], seed=cfg["seed"])
    history = train(model, examples, tcfg, stft_cfg, max_steps=cfg["max_steps"],
                    log=lambda e, l: print(f"epoch {e}: loss {l:.6f}"))

    save_checkpoint(out / "model.ckpt", model, stft_cfg, manifest.fs,
                    extra={"final_loss": history[-1], "steps": len(history)})
    loss_csv = "step,loss\n" + "\n".join(
        f"{i},{v:.10g}" for i, v in enumerate(history)
    ) + "\n"
    (out / "loss.csv").write_text(loss_csv)
    line_plot(out / "loss.svg",
              [("training loss", np.arange(len(history)), np.array(history))],
              title="Training loss", xlabel="step", ylabel="loss")
    print(f"trained {len(history)} steps; final loss {history[-1]:.6f}; "
          f"checkpoint at {out / 'model.ckpt'}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------------


def _eval_one(ds: str, rid: int, methods: tuple, ckpt: str | None):
    manifest = load_manifest(Path(ds) / MANIFEST_NAME)
    record = load_dataset_record(ds, manifest, rid)
    model = stft_cfg = None
    if "cunet" in methods:
        model, stft_cfg, _, _ = load_checkpoint(ckpt)
    return rp.evaluate_record(record, methods, model, stft_cfg, record_id=rid)


def cmd_eval(args, parser) -> int:
    out = _resolve_out(args.out, parser)
    defaults = {"dataset": None, "methods": "cunet,ekf,eks,svd,passthrough",
                "checkpoint": None, "jobs": 1, "overlays": 3}
    cfg = _merge_config(args, defaults)
    if not cfg["dataset"]:
        parser.error("--dataset is required")
    methods = tuple(m.strip() for m in str(cfg["methods"]).split(",") if m.strip())
    unknown = set(methods) - set(rp.METHODS)
    if unknown:
        parser.error(f"unknown methods: {sorted(unknown)}")
    if "cunet" in methods and not cfg["checkpoint"]:
        parser.error("method 'cunet' requires --checkpoint")
    ds = Path(cfg["dataset"])
    manifest = load_manifest(ds / MANIFEST_NAME)
    _write_resolved(out, "eval", cfg)

    test_ids = list(manifest.test_ids)
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as ex:
            per_record = list(ex.map(
                _eval_one, [str(ds)] * len(test_ids), test_ids,
                [methods] * len(test_ids), [cfg["checkpoint"]] * len(test_ids),
            ))
    else:
        per_record = [_eval_one(str(ds), rid, methods, cfg["checkpoint"])
                      for rid in test_ids]
    scores = [s for rec_scores in per_record for s in rec_scores]
    scores.sort(key=lambda s: (s.record_id, s.method))

    (out / "per_record.csv").write_text(rp.scores_to_csv(scores))
    (out / "aggregate.json").write_text(
        json.dumps(rp.aggregate(scores), indent=2, sort_keys=True))
    (out / "by_snr.json").write_text(
        json.dumps(rp.aggregate_by_snr(scores), indent=2, sort_keys=True))

    # Overlay plots of reference vs estimate for the first few test records.
    model = stft_cfg = None
    if "cunet" in methods:
        model, stft_cfg, _, _ = load_checkpoint(cfg["checkpoint"])
    for rid in test_ids[: cfg["overlays"]]:
        record = load_dataset_record(ds, manifest, rid)
        fs = record.abdominal.fs
        n = min(len(record.fecg_ref), int(5 * fs))
        t = np.arange(n) / fs
        series = [("reference fECG", t, record.fecg_ref.samples[:n])]
        for m in methods:
            if m == "passthrough":
                continue
            est = rp.run_method(m, record, model, stft_cfg)
            series.append((m, t, est.samples[:n]))
        line_plot(out / f"overlay_{rid:05d}.svg", series,
                  title=f"record {rid}: reference vs estimates",
                  xlabel="time (s)", ylabel="amplitude (uV)")

    agg = rp.aggregate(scores)
    for m in methods:
        row = agg[m]
        print(f"{m:12s} PRD {row['prd']['mean']:8.2f} +/- {row['prd']['std']:7.2f}   "
              f"PCC {row['pcc']['mean']:7.2f} +/- {row['pcc']['std']:6.2f}")
    return EXIT_OK


# -- extract ---------------------------------------------------------------------


def cmd_extract(args, parser) -> int:
    out = _resolve_out(args.out, parser)
    defaults = {"checkpoint": None, "record": None}
    cfg = _merge_config(args, defaults)
    if not cfg["checkpoint"] or not cfg["record"]:
        parser.error("--checkpoint and --record are required")
    model, stft_cfg, ckpt_fs, _ = load_checkpoint(cfg["checkpoint"])
    record = load_record(cfg["record"])
    if record.abdominal.fs != ckpt_fs:
        raise RejectedInput(
            f"sampling rate mismatch: record {record.abdominal.fs} Hz, "
            f"checkpoint {ckpt_fs} Hz"
        )
    _write_resolved(out, "extract", cfg)
    estimate = extract_fecg(model, preprocess(record.abdominal), stft_cfg)

    lines = ["sample,estimate_uv"]
    lines += [f"{i},{v:.10g}" for i, v in enumerate(estimate.samples)]
    (out / "extracted.csv").write_text("\n".join(lines) + "\n")

    fs = record.abdominal.fs
    n = min(len(estimate), int(5 * fs))
    t = np.arange(n) / fs
    line_plot(out / "extracted.svg",
              [("reference fECG", t, record.fecg_ref.samples[:n]),
               ("extracted", t, estimate.samples[:n])],
              title="extracted vs reference fECG",
              xlabel="time (s)", ylabel="amplitude (uV)")
    print(f"wrote {len(estimate)} samples to {out / 'extracted.csv'}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fecglab",
                                description="fetal ECG extraction laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a dataset")
    g.add_argument("--records", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--duration-s", dest="duration_s", type=float)
    g.add_argument("--full-scale", dest="full_scale", action="store_const", const=True)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train the complex UNet")
    t.add_argument("--dataset")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--depth", type=int)
    t.add_argument("--channels")
    t.add_argument("--activation")
    t.add_argument("--conv-mode", dest="conv_mode")
    t.add_argument("--max-steps", dest="max_steps", type=int)
    t.add_argument("--max-records", dest="max_records", type=int)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="score methods on the test split")
    e.add_argument("--dataset")
    e.add_argument("--methods")
    e.add_argument("--checkpoint")
    e.add_argument("--jobs", type=int)
    e.add_argument("--overlays", type=int)
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("extract", help="run a checkpoint over one record")
    x.add_argument("--checkpoint")
    x.add_argument("--record")
    x.set_defaults(fn=cmd_extract)

    for s in (g, t, e, x):
        s.add_argument("--config", help="JSON config file; flags override its values")
        s.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV})")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args, parser)
    except SystemExit as exc:  # parser.error inside a command
        return EXIT_USAGE if exc.code else EXIT_OK
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FecgLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
