"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 input error, 4 numeric/training failure,
5 corrupt bitstream.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

from .autodiff import NumericError
from .codec import BitstreamError, deserialize
from .imageio import (
    LightFieldIOError, atomic_write_bytes, encode_ppm, encode_raw_frame, export_pvs,
    load_lightfield, save_lightfield,
)
from .lightfield import LightField
from .metrics import evaluate
from .model import ConfigError, decode_all, decode_view
from .pipeline import RD_HEADER, StageError, encode_lightfield, load_preset, rd_row, versions
from .synth import synth_lightfield
from .train import TrainingDiverged

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_CORRUPT = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _write_json(path, obj) -> None:
    atomic_write_bytes(path, _json_bytes(obj))


def _load_input(path):
    try:
        return load_lightfield(path)
    except (LightFieldIOError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _print_report(report, out=None) -> None:
    s = report.summary()
    line = f"YUV-PSNR {s['yuv_psnr']:.3f} dB  Y-SSIM {s['y_ssim']:.4f}"
    if "bpp" in s:
        line = f"bpp {s['bpp']:.6g}  " + line
    print(line, file=out or sys.stdout)


def cmd_encode(args) -> int:
    lf = _load_input(args.input)
    preset = load_preset(args.config or args.preset)

    def progress(rec):
        if args.verbose and (rec.epoch % 50 == 0):
            print(f"  epoch {rec.epoch:5d}  loss {rec.loss:.5f}  psnr {rec.psnr:.2f}  lr {rec.lr:.2e}",
                  file=sys.stderr)

    res = encode_lightfield(lf, preset, args.seed, epochs=args.epochs,
                            finetune_epochs=args.finetune_epochs, prune_ratio=args.prune_ratio,
                            quant_bits=args.quant_bits, alpha=args.alpha, progress=progress)
    out = Path(args.output)
    atomic_write_bytes(out, res.stream)
    outputs = {"bitstream": str(out), "manifest": str(out) + ".manifest.json",
               "timings": str(out) + ".timings.json"}
    if args.log_csv:
        log = res.train_log.to_csv()
        if res.finetune_log is not None:
            log += res.finetune_log.to_csv()
        atomic_write_bytes(args.log_csv, log.encode())
        outputs["train_log"] = str(args.log_csv)
    manifest = res.manifest(args.seed, preset.get("name", str(args.config)), args.input, outputs)
    _write_json(outputs["manifest"], manifest)
    _write_json(outputs["timings"], {"seconds": res.timings})
    print(f"params {res.num_parameters}  bytes {len(res.stream)}")
    print("uncompressed: ", end="")
    _print_report(res.uncompressed)
    print("compressed:   ", end="")
    _print_report(res.compressed)
    return EXIT_OK


def _read_stream(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read bitstream: {exc}") from exc
    return deserialize(data), len(data)


def cmd_decode(args) -> int:
    (model, _, _), nbytes = _read_stream(args.bitstream)
    lf = LightField(decode_all(model))
    if args.reference:
        ref = _load_input(args.reference)
        report = evaluate(ref, lf, nbytes)
        for i, (u, v) in enumerate(ref.coords()):
            print(f"view ({u},{v})  YUV-PSNR {report.yuv_psnr[i]:.3f}  Y-SSIM {report.y_ssim[i]:.4f}")
        _print_report(report)
    save_lightfield(lf, args.output, bitdepth=args.bitdepth)
    if args.raw:
        export_pvs(lf, args.raw)
    return EXIT_OK


def _parse_coord(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InputError(f"bad coordinate {text!r}") from exc


def cmd_decode_view(args) -> int:
    (model, _, _), _ = _read_stream(args.bitstream)
    cfg = model.config
    u, v = _parse_coord(args.u), _parse_coord(args.v)
    in_grid = u.is_integer() and v.is_integer() and 0 <= u < cfg.U and 0 <= v < cfg.V
    if not in_grid and not args.experimental_fractional:
        raise InputError(f"({args.u},{args.v}) is outside the {cfg.U}x{cfg.V} grid "
                         "(use --experimental-fractional for off-grid queries)")
    coord = (int(u), int(v)) if in_grid else (u, v)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        img = decode_view(model, coord, experimental=not in_grid)
    out = Path(args.output)
    if out.suffix == ".raw":
        atomic_write_bytes(out, encode_raw_frame(img))
    else:
        atomic_write_bytes(out, encode_ppm(img, args.bitdepth))
    if not in_grid:
        print(f"EXPERIMENTAL: off-grid view ({u},{v}); no quality guarantee", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref = _load_input(args.reference)
    rec = _load_input(args.reconstruction)
    nbytes = Path(args.stream).stat().st_size if args.stream else None
    try:
        report = evaluate(ref, rec, nbytes)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        _print_report(report)
    return EXIT_OK


def _sweep_one(job):
    lf, name, seed, kwargs = job
    try:
        res = encode_lightfield(lf, load_preset(name), seed, **kwargs)
        return rd_row(name, res), len(res.stream), None
    except Exception as exc:  # recorded, the sweep continues
        return None, None, f"{type(exc).__name__}: {exc}"


def cmd_rd_sweep(args) -> int:
    lf = _load_input(args.input)
    names = [p for p in args.presets.split(",") if p]
    if not names:
        raise InputError("no presets given")
    for name in names:
        load_preset(name)
    kwargs = dict(epochs=args.epochs, finetune_epochs=args.finetune_epochs,
                  prune_ratio=args.prune_ratio, quant_bits=args.quant_bits, alpha=args.alpha)
    jobs = [(lf, name, args.seed + i if args.distinct_seeds else args.seed, kwargs)
            for i, name in enumerate(names)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RD_HEADER, lineterminator="\n")
    w.writeheader()
    runs = []
    for (lf_, name, seed, _), (row, nbytes, err) in zip(jobs, results):
        if row is None:
            print(f"preset {name} failed: {err}", file=sys.stderr)
            row = {"preset": name, **{k: math.nan for k in RD_HEADER[1:]}}
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        runs.append({"preset": name, "seed": seed, "stream_bytes": nbytes, "error": err})
    atomic_write_bytes(args.output, buf.getvalue().encode())
    _write_json(str(args.output) + ".manifest.json", {
        "tool": "lfinr", "command": "rd-sweep", "versions": versions(), "input": str(args.input),
        "pixels": lf.num_pixels, "overrides": kwargs, "runs": runs,
    })
    print(buf.getvalue(), end="")
    return EXIT_OK if all(r["error"] is None for r in runs) else EXIT_NUMERIC


def cmd_export_pvs(args) -> int:
    lf = _load_input(args.input)
    order = export_pvs(lf, args.output)
    print(f"{len(order)} frames -> {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    U, V, H, W = args.dims
    lf = synth_lightfield(args.seed, U, V, H, W, disparity=args.disparity)
    meta = {"seed": args.seed, "dims": [U, V, H, W], "disparity": args.disparity,
            "bitdepth": args.bitdepth}
    save_lightfield(lf, args.output, bitdepth=args.bitdepth,
                    extra_files={"synth.json": _json_bytes(meta)})
    return EXIT_OK


def _add_codec_flags(p):
    p.add_argument("--preset", default="tiny", help="tiny | small | medium | full")
    p.add_argument("--config", help="preset JSON file (overrides --preset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--finetune-epochs", type=int)
    p.add_argument("--prune-ratio", type=float)
    p.add_argument("--quant-bits", type=int)
    p.add_argument("--alpha", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfinr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="train, compress and write a bitstream")
    p.add_argument("input", help="light-field directory (view_UU_VV.ppm) or LFRW stream")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--log-csv", help="write the training log as CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct every view")
    p.add_argument("bitstream")
    p.add_argument("-o", "--output", required=True, help="output view directory")
    p.add_argument("--reference", help="reference light field for metrics")
    p.add_argument("--bitdepth", type=int, choices=(8, 16), default=16)
    p.add_argument("--raw", help="also write the exact float views as an LFRW stream")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("decode-view", help="reconstruct a single view")
    p.add_argument("bitstream")
    p.add_argument("u")
    p.add_argument("v")
    p.add_argument("-o", "--output", required=True, help=".ppm, or .raw for exact floats")
    p.add_argument("--bitdepth", type=int, choices=(8, 16), default=16)
    p.add_argument("--experimental-fractional", action="store_true")
    p.set_defaults(func=cmd_decode_view)

    p = sub.add_parser("metrics", help="YUV-PSNR / Y-SSIM between two light fields")
    p.add_argument("reference")
    p.add_argument("reconstruction")
    p.add_argument("--stream", help="bitstream file, for bpp")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("rd-sweep", help="encode with several presets, write an RD table")
    p.add_argument("input")
    p.add_argument("--presets", default="tiny,small,medium")
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--distinct-seeds", action="store_true", help="use seed + preset index")
    _add_codec_flags(p)
    p.set_defaults(func=cmd_rd_sweep)

    p = sub.add_parser("export-pvs", help="serpentine pseudo-video for external codecs")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_pvs)

    p = sub.add_parser("synth", help="write a synthetic light field")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=int, nargs=4, metavar=("U", "V", "H", "W"), default=(3, 3, 24, 32))
    p.add_argument("--disparity", type=float, default=1.0)
    p.add_argument("--bitdepth", type=int, choices=(8, 16), default=16)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc}", file=sys.stderr)
        if isinstance(exc.original, (TrainingDiverged, NumericError)):
            return EXIT_NUMERIC
        if isinstance(exc.original, BitstreamError):
            return EXIT_CORRUPT
        return EXIT_INPUT
    except BitstreamError as exc:
        print(f"corrupt bitstream: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (TrainingDiverged, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, LightFieldIOError, ConfigError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
