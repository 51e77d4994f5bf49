"""Command-line front end: compress, decompress, bench, sweep.

Success exits 0. Any failure prints one line to stderr in the form
`trc: error: <Kind>: <message>` and exits 1 (argparse keeps its own exit 2
for usage mistakes).
"""

from __future__ import annotations

import argparse
import csv
import sys

from .bench import run_once, sweep, write_csv
from .model import ModelConfig
from .pipeline import compress, decompress

_AXIS_FIELDS = {
    "hidden": "hidden_dim",
    "ffn": "ffn_dim",
    "groups": "group_size",
    "context": "context_len",
    "shared-ffn": "shared_ffn_repeats",
    "heads": "num_heads",
}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=int, default=256, help="hidden dimension (default 256)")
    p.add_argument("--ffn", type=int, default=4096, help="FFN dimension (default 4096)")
    p.add_argument("--groups", type=int, default=4, help="bytes per embedding group (default 4)")
    p.add_argument("--context", type=int, default=8, help="context positions (default 8)")
    p.add_argument("--shared-ffn", type=int, default=2, dest="shared_ffn",
                   help="shared-FFN repeat count (default 2)")
    p.add_argument("--heads", type=int, default=8, help="attention heads (default 8)")
    p.add_argument("--lanes", type=int, default=64, help="parallel coding lanes (default 64)")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate (default 0.001)")
    p.add_argument("--bp-controller", action="store_true", dest="bp_controller",
                   help="gate updates on the loss-cache threshold (default off)")
    p.add_argument("--cache-size", type=int, default=16, dest="cache_size",
                   help="loss-cache capacity (default 16)")


def _config(args) -> ModelConfig:
    return ModelConfig(hidden_dim=args.hidden, ffn_dim=args.ffn,
                       group_size=args.groups, context_len=args.context,
                       shared_ffn_repeats=args.shared_ffn, num_heads=args.heads)


def _parse_axis(spec: str) -> tuple[str, list[int]]:
    name, _, values = spec.partition("=")
    if name not in _AXIS_FIELDS or not values:
        raise ValueError(
            f"axis must look like name=v1,v2 with name in "
            f"{sorted(_AXIS_FIELDS)}, got {spec!r}")
    return name, [int(v) for v in values.split(",")]


def _parse_overrides(spec: str) -> dict:
    out = {}
    for part in spec.split(","):
        name, _, value = part.partition("=")
        if name not in _AXIS_FIELDS or not value:
            raise ValueError(f"reference must look like name=value[,name=value], got {spec!r}")
        out[_AXIS_FIELDS[name]] = int(value)
    return out


def _write_metrics(path: str, metrics) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("phase", "steps", "bytes_in", "bits_out",
                         "mean_loss", "skip_count", "wall_s"))
        writer.writerow(("warmup", 0, metrics.warmup_bytes, metrics.warmup_bits, "", 0, ""))
        for i, c in enumerate(metrics.chunks):
            writer.writerow((f"chunk{i}", c.steps, c.bytes_in, c.bits_out,
                             f"{c.mean_loss:.6f}", c.skip_count, f"{c.wall_s:.6f}"))


def _cmd_compress(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    res = compress(data, _config(args), seed=args.seed, lanes=args.lanes,
                   lr=args.lr, controller=args.bp_controller,
                   cache_capacity=args.cache_size, chunk_steps=args.chunk_steps)
    with open(args.outfile, "wb") as fh:
        fh.write(res.container)
    if args.metrics_out:
        _write_metrics(args.metrics_out, res.metrics)
    ratio = len(data) / len(res.container) if res.container else 0.0
    print(f"{args.infile}: {len(data)} -> {len(res.container)} bytes "
          f"(ratio {ratio:.3f}, skip {res.skip_fraction:.1%})")
    return 0


def _cmd_decompress(args) -> int:
    with open(args.infile, "rb") as fh:
        blob = fh.read()
    res = decompress(blob)
    with open(args.outfile, "wb") as fh:
        fh.write(res.data)
    print(f"{args.infile}: {len(blob)} -> {len(res.data)} bytes")
    return 0


def _cmd_bench(args) -> int:
    with open(args.corpus, "rb") as fh:
        data = fh.read()
    rec = run_once(data, _config(args), seed=args.seed, corpus_id=args.corpus,
                   lanes=args.lanes, lr=args.lr, controller=args.bp_controller,
                   cache_capacity=args.cache_size, runs=args.runs)
    if args.csv_out:
        write_csv([rec], args.csv_out)
    print(",".join(str(v) for v in rec.row()))
    return 0


def _cmd_sweep(args) -> int:
    with open(args.corpus, "rb") as fh:
        data = fh.read()
    base = _config(args)
    cells = []
    for spec in args.axis:
        name, values = _parse_axis(spec)
        for v in values:
            cfg = ModelConfig(**{**_cfg_kwargs(base), _AXIS_FIELDS[name]: v})
            if cfg not in cells:
                cells.append(cfg)
    reference = None
    if args.reference:
        reference = ModelConfig(**{**_cfg_kwargs(base), **_parse_overrides(args.reference)})
    result = sweep(data, cells, reference=reference, seed=args.seed,
                   corpus_id=args.corpus, lanes=args.lanes, lr=args.lr,
                   runs=args.runs)
    write_csv(result.records, args.csv_out)
    for label, why in result.failures:
        print(f"trc: sweep cell {label} failed: {why}", file=sys.stderr)
    print(f"wrote {len(result.records)} records to {args.csv_out}"
          + (f" ({len(result.failures)} failed cells)" if result.failures else ""))
    return 0


def _cfg_kwargs(cfg: ModelConfig) -> dict:
    return {"hidden_dim": cfg.hidden_dim, "ffn_dim": cfg.ffn_dim,
            "group_size": cfg.group_size, "context_len": cfg.context_len,
            "shared_ffn_repeats": cfg.shared_ffn_repeats,
            "num_heads": cfg.num_heads}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trc",
        description="Lossless byte-stream compressor driven by an online-trained transformer.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a file into a container")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.add_argument("--seed", type=int, required=True,
                   help="model init seed, stored in the container")
    _add_model_flags(p)
    p.add_argument("--metrics-out", dest="metrics_out", default=None,
                   help="write per-chunk metrics CSV here")
    p.add_argument("--chunk-steps", type=int, default=256, dest="chunk_steps",
                   help="steps per metrics chunk (default 256)")
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("decompress", help="restore the original file")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.set_defaults(func=_cmd_decompress)

    p = sub.add_parser("bench", help="measure one config on a corpus")
    p.add_argument("corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=3, help="timing repetitions (default 3)")
    p.add_argument("--csv-out", dest="csv_out", default=None)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("sweep", help="run a structure sweep, one axis at a time")
    p.add_argument("corpus")
    p.add_argument("--axis", action="append", required=True,
                   help="axis spec like hidden=64,128,256; repeatable")
    p.add_argument("--reference", default=None,
                   help="reference cell overrides like hidden=128,ffn=512 "
                        "(default: fewest parameters)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--csv-out", dest="csv_out", default="sweep.csv")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"trc: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
