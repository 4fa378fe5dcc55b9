"""``facepad`` command line.

Every command reads its inputs, validates them, and only then writes its
outputs (atomically). Failures print one line ``error[<class>]: <detail>``
on stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .data.features import Arrays, build_feature_cache, load_arrays
from .data.manifest import ManifestRecord, by_split, load_manifest
from .data.synth import write_synth_dataset
from .errors import FacePadError, InsufficientDataError, ValidationError
from .eval.metrics import (
    ScoreSet,
    aggregate_by_group,
    evaluate,
    hter,
    read_scores,
    write_roc_csv,
    write_scores,
)
from .eval.protocol import cross_eval
from .gradcheck import check_layers, check_model
from .model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model.config import ModelConfig
from .model.network import DualChannelNet
from .runconfig import RunConfig, resolve
from .texture.descriptor import DescriptorSettings
from .train import predict, train


def _dump(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ValidationError(f"{what} path is required")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} {p} not found")
    return p


def _require_out(path, what: str) -> Path:
    if path is None:
        raise ValidationError(f"{what} output path is required")
    p = Path(path)
    if p.exists() and p.is_dir():
        raise ValidationError(f"{what} output {p} is a directory")
    return p


def _print(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def group_of(rec: ManifestRecord) -> str:
    """Video/session id: parent directory, subject and presentation."""
    return f"{Path(rec.path).parent.as_posix()}|{rec.subject}|{rec.attack_type}"


def _load_split(records: list[ManifestRecord], split: str, root: Path, cfg: RunConfig,
                mcfg: ModelConfig, cache=None) -> tuple[list[ManifestRecord], Arrays]:
    chosen = records if split == "all" else by_split(records, split)
    if not chosen:
        raise InsufficientDataError(f"manifest has no records in split {split!r}")
    arrays = load_arrays(chosen, root, cfg.preprocess_spec(), DescriptorSettings(),
                         cache_path=cache, need_images=mcfg.uses_deep,
                         need_features=mcfg.uses_wide)
    return chosen, arrays


def _scores(model: DualChannelNet, records, arrays: Arrays) -> ScoreSet:
    p = np.clip(predict(model, arrays), 0.0, 1.0)
    return ScoreSet([r.path for r in records], np.array([r.label for r in records]), p,
                    [group_of(r) for r in records])


def _root_for(manifest: Path, root) -> Path:
    return Path(root) if root else manifest.parent


# -- commands -----------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ValidationError(f"{out} is not empty (use --force to write into it)")
    splits = {}
    for split, total in (("train", args.train), ("dev", args.dev), ("test", args.test)):
        if total:
            if total < 2:
                raise ValidationError(f"{split}: need at least 2 images (one per class)")
            splits[split] = (total // 2, total - total // 2)
    if not splits:
        raise ValidationError("nothing to generate")
    effective = cfg.to_dict() | {"synth": {"splits": splits, "size": args.size,
                                           "profile": args.profile, "subjects": args.subjects}}
    records = write_synth_dataset(out, splits, cfg.seed, args.size, args.profile, args.subjects,
                                  comment=_dump(effective))
    _print(json.dumps({"manifest": str(out / "manifest.csv"), "images": len(records)}))
    return 0


def cmd_extract(args, cfg: RunConfig) -> int:
    manifest = _require_file(cfg.manifest, "manifest")
    out = _require_out(cfg.out, "cache")
    records = load_manifest(manifest)
    if args.split != "all":
        records = by_split(records, args.split)
    if not records:
        raise InsufficientDataError(f"no records in split {args.split!r}")
    report = build_feature_cache(records, _root_for(manifest, cfg.root), out, cfg.preprocess_spec(),
                                 DescriptorSettings(), {"run": cfg.to_dict()}, cfg.workers)
    _print(json.dumps(report.to_dict()))
    if report.written == 0:
        raise InsufficientDataError("no image could be described")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    manifest = _require_file(cfg.manifest, "manifest")
    out = _require_out(cfg.checkpoint, "checkpoint")
    if cfg.cache:
        _require_file(cfg.cache, "feature cache")
    log_path = Path(cfg.log) if cfg.log else out.with_suffix(".loss.csv")
    mcfg = cfg.model_config()
    records, arrays = _load_split(load_manifest(manifest), args.split,
                                  _root_for(manifest, cfg.root), cfg, mcfg, cfg.cache)
    if len(set(arrays.labels.tolist())) < 2:
        raise InsufficientDataError("training split needs both genuine and spoof samples")
    model = DualChannelNet(mcfg)
    optimizer, log = train(model, arrays, cfg.epochs, cfg.batch_size, cfg.optimizer(), cfg.seed,
                           fit_standardizer=True)
    effective = cfg.to_dict()
    buf = io.StringIO()
    buf.write(f"# {_dump(effective)}\nepoch,step,loss,lr\n")
    for row in log:
        buf.write(f"{row.epoch},{row.step},{row.loss!r},{row.lr!r}\n")
    save_checkpoint(model, out, optimizer, {"run": effective, "epochs": cfg.epochs,
                                            "train_samples": len(records)})
    atomic_write_text(log_path, buf.getvalue())
    final = log[-1].loss if log else float("nan")
    _print(json.dumps({"checkpoint": str(out), "log": str(log_path), "steps": len(log),
                       "final_loss": final}))
    return 0


def _model_from(path) -> tuple[Checkpoint, DualChannelNet]:
    ckpt = load_checkpoint(_require_file(path, "checkpoint"))
    return ckpt, ckpt.build_model()


def _cfg_for_checkpoint(cfg: RunConfig, ckpt: Checkpoint) -> RunConfig:
    """Preprocessing must follow the model the checkpoint was trained as."""
    cfg.model = {k: v for k, v in ckpt.config.to_dict().items()}
    cfg.model = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.model.items()}
    cfg.tiny = False
    return cfg


def cmd_predict(args, cfg: RunConfig) -> int:
    manifest = _require_file(cfg.manifest, "manifest")
    out = _require_out(cfg.out, "score file")
    ckpt, model = _model_from(cfg.checkpoint)
    cfg = _cfg_for_checkpoint(cfg, ckpt)
    records, arrays = _load_split(load_manifest(manifest), args.split,
                                  _root_for(manifest, cfg.root), cfg, ckpt.config, cfg.cache)
    scores = _scores(model, records, arrays)
    write_scores(out, scores, _dump(cfg.to_dict() | {"split": args.split}))
    _print(json.dumps({"scores": str(out), "count": len(scores)}))
    return 0


def _report_payload(report, cfg: RunConfig, mode: str, extra: dict) -> dict:
    return {"config": cfg.to_dict(), "aggregation": mode, "report": report.to_dict(), **extra}


def _human(report, title: str) -> str:
    return (f"{title}\n"
            f"  EER   {100 * report.eer:7.3f}%  (threshold {report.eer_threshold:.6g})\n"
            f"  HTER  {100 * report.hter:7.3f}%  (threshold {report.threshold:.6g}, "
            f"FAR {100 * report.far:.3f}%, FRR {100 * report.frr:.3f}%)\n"
            f"  genuine {report.counts['genuine']}, spoof {report.counts['spoof']}")


def cmd_eval(args, cfg: RunConfig) -> int:
    out = Path(cfg.out) if cfg.out else None
    modes = ["frame", "video"] if cfg.aggregate == "both" else [cfg.aggregate]
    if args.scores:
        test = read_scores(_require_file(args.scores, "score file"))
        dev = read_scores(_require_file(args.dev_scores, "dev score file")) if args.dev_scores else None
        source = {"scores": args.scores, "dev_scores": args.dev_scores}
    else:
        manifest = _require_file(cfg.manifest, "manifest")
        ckpt, model = _model_from(cfg.checkpoint)
        cfg = _cfg_for_checkpoint(cfg, ckpt)
        records = load_manifest(manifest)
        root = _root_for(manifest, cfg.root)
        recs, arr = _load_split(records, "test", root, cfg, ckpt.config, cfg.cache)
        test = _scores(model, recs, arr)
        dev = None
        if args.threshold is None:
            recs, arr = _load_split(records, "dev", root, cfg, ckpt.config, cfg.cache)
            dev = _scores(model, recs, arr)
        source = {"checkpoint": cfg.checkpoint, "manifest": cfg.manifest}
    payloads, texts = [], []
    for mode in modes:
        t = aggregate_by_group(test) if mode == "video" else test
        d = (aggregate_by_group(dev) if mode == "video" else dev) if dev is not None else None
        if args.threshold is not None:
            report = hter(None, t, threshold=args.threshold)
        elif d is not None:
            report = hter(d, t)
        else:
            report = evaluate(t)
        payloads.append(_report_payload(report, cfg, mode, {"source": source}))
        texts.append(_human(report, f"evaluation ({mode})"))
        if args.roc:
            roc_path = Path(args.roc)
            if len(modes) > 1:
                roc_path = roc_path.with_name(f"{roc_path.stem}.{mode}{roc_path.suffix}")
            write_roc_csv(roc_path, report.roc)
    if out is not None:
        body = payloads[0] if len(payloads) == 1 else {"reports": payloads}
        atomic_write_text(out, json.dumps(body, indent=2, sort_keys=True))
    _print("\n".join(texts))
    return 0


def _pairs(values: list[str], what: str) -> dict[str, str]:
    out = {}
    for v in values or []:
        if "=" not in v:
            raise ValidationError(f"{what} must be NAME=PATH, got {v!r}")
        name, path = v.split("=", 1)
        out.setdefault(name, [])
        out[name].append(path)
    return out


def cmd_crosseval(args, cfg: RunConfig) -> int:
    models = _pairs(args.models, "--model")
    datasets = {k: v[-1] for k, v in _pairs(args.dataset, "--dataset").items()}
    caches = {k: v[-1] for k, v in _pairs(args.dataset_cache, "--dataset-cache").items()}
    if not models or not datasets:
        raise ValidationError("need at least one --model and one --dataset")
    for name in models:
        if name not in datasets:
            raise ValidationError(f"model trained on {name!r} but no --dataset {name}=... given")
    for name, path in datasets.items():
        _require_file(path, f"manifest for {name}")
    manifests = {name: load_manifest(path) for name, path in datasets.items()}
    for name, recs in manifests.items():
        if not by_split(recs, "test"):
            raise ValidationError(f"dataset {name!r} has no test split")
    for name in models:
        if not by_split(manifests[name], "dev"):
            raise ValidationError(f"training dataset {name!r} has no dev split")

    scores: dict = {}
    for train_name, paths in models.items():
        for path in paths:
            ckpt, model = _model_from(path)
            run = _cfg_for_checkpoint(resolve(None, {}, {}), ckpt)
            method = ckpt.config.variant
            by_data = scores.setdefault(method, {}).setdefault(train_name, {})
            for name, recs in manifests.items():
                root = Path(datasets[name]).parent
                splits = ("dev", "test") if name == train_name else ("test",)
                for split in splits:
                    chosen, arr = _load_split(recs, split, root, run, ckpt.config, caches.get(name))
                    by_data.setdefault(name, {})[split] = _scores(model, chosen, arr)
    modes = ("frame", "video") if cfg.aggregate == "both" else (cfg.aggregate,)
    result = cross_eval(scores, modes=modes)
    table = result.render()
    if cfg.out:
        body = result.to_dict() | {"config": cfg.to_dict(), "models": models, "datasets": datasets}
        atomic_write_text(cfg.out, json.dumps(body, indent=2, sort_keys=True))
    if args.table:
        atomic_write_text(args.table, f"# {_dump(cfg.to_dict())}\n{table}\n")
    _print(table)
    return 0


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    mcfg = cfg.model_config() if (cfg.tiny or cfg.model) else ModelConfig.tiny(seed=cfg.seed)
    results = check_layers(mcfg, args.epsilon, cfg.seed, args.max_coords)
    if not args.layers_only:
        results |= check_model(mcfg, args.model_epsilon, cfg.seed, args.max_coords)
    width = max(len(k) for k in results)
    lines = [f"{k.ljust(width)}  {v:.3e}  {'ok' if v <= args.tolerance else 'FAIL'}"
             for k, v in results.items()]
    worst = max(results, key=results.get)
    lines.append(f"max {results[worst]:.3e} at {worst} (tolerance {args.tolerance:g})")
    if cfg.out:
        atomic_write_text(cfg.out, json.dumps({"config": cfg.to_dict(), "model": mcfg.to_dict(),
                                               "errors": results}, indent=2, sort_keys=True))
    _print("\n".join(lines))
    if results[worst] > args.tolerance:
        raise GradientMismatch(f"{worst}: relative error {results[worst]:.3e} > {args.tolerance:g}")
    return 0


class GradientMismatch(FacePadError):
    code = "gradient-mismatch"


def inspect_table(mcfg: ModelConfig) -> tuple[str, dict]:
    table = mcfg.param_table()
    lines = [f"{'block':6} {'layer':12} {'kind':10} {'size in':>14} {'size out':>14} {'params':>12}"]
    data = {"config": mcfg.to_dict(), "blocks": {}}

    def fmt(shape):
        return "x".join(str(d) for d in shape)

    for block, (rows, total) in table.items():
        data["blocks"][block] = {"rows": [
            {"name": r.name, "kind": r.kind, "size_in": list(r.size_in),
             "size_out": list(r.size_out), "params": r.params} for r in rows], "total": total}
        for r in rows:
            lines.append(f"{block:6} {r.name:12} {r.kind:10} {fmt(r.size_in):>14} "
                         f"{fmt(r.size_out):>14} {r.params:>12,}")
        lines.append(f"{block:6} {'total':12} {'':10} {'':>14} {'':>14} {total:>12,}")
    grand = sum(t for _, t in table.values())
    data["total"] = grand
    lines.append(f"{'all':6} {'total':12} {'':10} {'':>14} {'':>14} {grand:>12,}")
    return "\n".join(lines), data


def cmd_inspect(args, cfg: RunConfig) -> int:
    mcfg = load_checkpoint(_require_file(cfg.checkpoint, "checkpoint")).config \
        if cfg.checkpoint else cfg.model_config()
    text, data = inspect_table(mcfg)
    if cfg.out:
        atomic_write_text(cfg.out, json.dumps(data | {"run": cfg.to_dict()}, indent=2, sort_keys=True))
    _print(text)
    return 0


# -- argument parsing -----------------------------------------------------------

def _common(p: argparse.ArgumentParser, *keys: str) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. model.input_size=64")
    flags = {
        "manifest": dict(help="dataset manifest CSV"),
        "root": dict(help="image root (default: manifest directory)"),
        "cache": dict(help="feature cache file"),
        "checkpoint": dict(help="checkpoint file"),
        "out": dict(help="output file"),
        "log": dict(help="loss log CSV"),
        "tiny": dict(action="store_const", const=True, help="use the reduced-width model"),
        "input_size": dict(type=int, help="model input side (model.input_size)"),
        "variant": dict(choices=("dual", "deep", "wide"), help="model variant (model.variant)"),
        "epochs": dict(type=int),
        "batch_size": dict(type=int),
        "learning_rate": dict(type=float),
        "decay": dict(type=float),
        "momentum": dict(type=float),
        "workers": dict(type=int),
        "aggregate": dict(choices=("frame", "video", "both")),
    }
    for k in keys:
        p.add_argument("--" + k.replace("_", "-"), dest=k, **flags[k])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facepad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"facepad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset and manifest")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train", type=int, default=2000)
    p.add_argument("--dev", type=int, default=500)
    p.add_argument("--test", type=int, default=500)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--profile", choices=("A", "B"), default="A")
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="build a descriptor feature cache")
    _common(p, "manifest", "root", "out", "input_size", "workers", "tiny")
    p.add_argument("--split", default="all", choices=("all", "train", "dev", "test"))
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model and write a checkpoint plus loss log")
    _common(p, "manifest", "root", "cache", "checkpoint", "log", "tiny", "input_size", "variant",
            "epochs", "batch_size", "learning_rate", "decay", "momentum")
    p.add_argument("--split", default="train", choices=("all", "train", "dev", "test"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a manifest split")
    _common(p, "manifest", "root", "cache", "checkpoint", "out")
    p.add_argument("--split", default="test", choices=("all", "train", "dev", "test"))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="EER/HTER report from score files or a checkpoint")
    _common(p, "manifest", "root", "cache", "checkpoint", "out", "aggregate")
    p.add_argument("--scores", help="test score file")
    p.add_argument("--dev-scores", help="dev score file fixing the threshold")
    p.add_argument("--threshold", type=float, help="explicit operating threshold")
    p.add_argument("--roc", help="write the ROC as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crosseval", help="train-set x eval-set EER/HTER matrices")
    _common(p, "out", "aggregate")
    p.add_argument("--model", dest="models", action="append", metavar="TRAINSET=CHECKPOINT",
                   required=True)
    p.add_argument("--dataset", action="append", metavar="NAME=MANIFEST", required=True)
    p.add_argument("--dataset-cache", action="append", metavar="NAME=CACHE")
    p.add_argument("--table", help="write the text tables here")
    p.set_defaults(func=cmd_crosseval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer and the model")
    _common(p, "out", "tiny", "input_size", "variant")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--model-epsilon", type=float, default=1e-6)
    p.add_argument("--max-coords", type=int, default=64)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--layers-only", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="per-layer parameter table")
    _common(p, "checkpoint", "out", "tiny", "input_size", "variant")
    p.set_defaults(func=cmd_inspect)
    return parser


_MODEL_FLAGS = ("input_size", "variant")


def _run_config(args) -> RunConfig:
    flags = {}
    for k, v in vars(args).items():
        if k in ("command", "func", "config", "set") or v is None:
            continue
        if k in _MODEL_FLAGS:
            flags[f"model.{k}"] = v
        elif k in RunConfig.__dataclass_fields__:
            flags[k] = v
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = v
    return resolve(args.config, flags)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except FacePadError as exc:
        code, detail = exc.code, str(exc)
    except FileNotFoundError as exc:
        code, detail = "missing-file", str(exc)
    except (ValueError, KeyError) as exc:
        code, detail = "invalid-argument", str(exc)
    except OSError as exc:
        code, detail = "io-error", str(exc)
    detail = " ".join(detail.split())
    sys.stderr.write(f"error[{code}]: {detail}\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
