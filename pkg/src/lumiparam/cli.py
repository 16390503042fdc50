"""Command-line front end: decompose | reconstruct | sparsify | eval | info.

Settings are resolved in three layers: built-in defaults, then a
--config file (TOML or JSON), then explicit flags. Batch commands
parallelize across files only (--jobs, or the LUMIPARAM_JOBS
environment variable), each file processed by the pure pipeline, so
results never depend on the level of parallelism.

Exit codes: 0 on full success, 1 if any file failed (other files are
still processed and written), 2 on usage errors. Metric values never
affect the exit code.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .codec import decompose_image, reconstruct_params, sparsify_params
from .errors import FormatError, SchemaError
from .hdr_io import read_map, tonemap, write_map, write_preview_png
from .metrics import evaluation_report, render_diffuse_sphere, render_mirror_sphere
from .params import (
    PARAM_FILE_SUFFIX,
    CodecConfig,
    read_params,
    write_params,
)

MAP_SUFFIXES = (".hdr", ".pic", ".pfm")

#: Schema for the JSON evaluation report emitted by the eval command.
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "rmse_full",
        "si_rmse_full",
        "rmse_diffuse",
        "si_rmse_diffuse",
        "rmse_mirror",
        "si_rmse_mirror",
        "composite_full",
        "degenerate",
        "losses",
    ],
    "properties": {
        "rmse_full": {"type": "number", "minimum": 0},
        "si_rmse_full": {"type": "number", "minimum": 0},
        "rmse_diffuse": {"type": "number", "minimum": 0},
        "si_rmse_diffuse": {"type": "number", "minimum": 0},
        "rmse_mirror": {"type": "number", "minimum": 0},
        "si_rmse_mirror": {"type": "number", "minimum": 0},
        "composite_full": {"type": "number", "minimum": 0},
        "degenerate": {"type": "boolean"},
        "losses": {
            "type": "object",
            "additionalProperties": {"type": "number"},
        },
    },
}

_CONFIG_KEYS = (
    "order",
    "n_anchors",
    "angular_size",
    "percentile",
    "k_nn",
    "mode",
    "map_height",
    "map_width",
)


def _load_config_file(path):
    text = Path(path).read_bytes()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


def _resolve_config(args):
    """Defaults, overridden by --config file, overridden by flags."""
    values = {}
    sparsify = None
    if getattr(args, "config", None):
        doc = _load_config_file(args.config)
        unknown = set(doc) - set(_CONFIG_KEYS) - {"sparsify"}
        if unknown:
            raise ValueError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        sparsify = doc.pop("sparsify", None)
        values.update(doc)
    flag_map = {
        "order": "order",
        "anchors": "n_anchors",
        "angular_size": "angular_size",
        "percentile": "percentile",
        "knn": "k_nn",
        "mode": "mode",
        "height": "map_height",
        "width": "map_width",
    }
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
    if getattr(args, "sparsify", False):
        sparsify = True
    return CodecConfig(**values), bool(sparsify)


def _add_config_flags(sub):
    sub.add_argument("--config", help="TOML or JSON settings file")
    sub.add_argument("--mode", choices=["solid-angle", "uniform"])
    sub.add_argument("--order", type=int, help="SH band limit K")
    sub.add_argument("--anchors", type=int, help="anchor count N")
    sub.add_argument(
        "--angular-size", type=float, dest="angular_size", help="kernel size s"
    )
    sub.add_argument(
        "--percentile", type=float, help="source-pixel fraction (default 0.05)"
    )
    sub.add_argument("--knn", type=int, help="anchor neighborhood size")


def _collect_inputs(paths):
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            found = sorted(
                q for q in p.iterdir() if q.suffix.lower() in MAP_SUFFIXES
            )
            out.extend(found)
        else:
            out.append(p)
    return out


def _decompose_task(in_path, out_path, config, sparsify, preview):
    img = read_map(in_path)
    params = decompose_image(img, config, meta={"source": str(in_path)})
    if sparsify:
        params, _ = sparsify_params(params)
    write_params(out_path, params)
    if preview:
        recon = reconstruct_params(
            params, config.map_height, config.map_width, clamp=True
        )
        write_preview_png(Path(out_path).with_suffix(".png"), tonemap(recon))
    return str(out_path)


def cmd_decompose(args):
    config, sparsify = _resolve_config(args)
    inputs = _collect_inputs(args.inputs)
    if not inputs:
        print("warning: no input files", file=sys.stderr)
        return 0

    out_arg = Path(args.output) if args.output else None
    tasks = []
    for p in inputs:
        if out_arg is None:
            out = p.parent / (p.stem + PARAM_FILE_SUFFIX)
        elif len(inputs) > 1 or out_arg.is_dir():
            out_arg.mkdir(parents=True, exist_ok=True)
            out = out_arg / (p.stem + PARAM_FILE_SUFFIX)
        else:
            out = out_arg
        tasks.append((p, out))

    failures = 0
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futs = {
                pool.submit(
                    _decompose_task, str(p), str(out), config, sparsify,
                    args.preview,
                ): p
                for p, out in tasks
            }
            for fut, p in futs.items():
                try:
                    fut.result()
                except Exception as exc:
                    failures += 1
                    print(f"error: {p}: {exc}", file=sys.stderr)
    else:
        for p, out in tasks:
            try:
                _decompose_task(str(p), str(out), config, sparsify, args.preview)
            except Exception as exc:
                failures += 1
                print(f"error: {p}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_reconstruct(args):
    params = read_params(args.paramfile)
    height = args.height or params.meta.get("height", 128)
    width = args.width or params.meta.get("width", 2 * height)
    out = Path(args.output) if args.output else Path(args.paramfile).with_suffix(
        ".hdr"
    )
    recon = reconstruct_params(params, int(height), int(width), clamp=True)
    write_map(out, recon)
    if args.preview:
        write_preview_png(out.with_suffix(".png"), tonemap(recon))
    return 0


def cmd_sparsify(args):
    params = read_params(args.paramfile)
    params, _ = sparsify_params(params)
    if args.output:
        out = Path(args.output)
    else:
        name = Path(args.paramfile).name
        if name.endswith(PARAM_FILE_SUFFIX):
            name = name[: -len(PARAM_FILE_SUFFIX)]
        else:
            name = Path(name).stem
        out = Path(args.paramfile).parent / (name + ".sparse" + PARAM_FILE_SUFFIX)
    write_params(out, params)
    return 0


def _flatten_report(doc):
    flat = dict(doc)
    losses = flat.pop("losses", {})
    for k, v in losses.items():
        flat[f"losses.{k}"] = v
    return flat


def cmd_eval(args):
    config, _ = _resolve_config(args)
    gt = read_map(args.gt)
    pred_path = Path(args.pred)
    if pred_path.suffix.lower() == ".json":
        pred = read_params(pred_path)
        config = replace(
            config,
            order=pred.order,
            n_anchors=pred.sg.n,
            k_nn=pred.anchors.k_nn,
            angular_size=pred.sg.s,
        )
    else:
        pred = read_map(pred_path)
    report = evaluation_report(
        pred,
        gt,
        config=config,
        render_size=args.render_size,
        sml_epsilon=args.sml_epsilon,
    )
    doc = report.as_dict()

    for key, value in _flatten_report(doc).items():
        print(f"{key} = {value}")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    if args.render:
        kinds = [k.strip() for k in args.render.split(",") if k.strip()]
        bad = set(kinds) - {"diffuse", "mirror"}
        if bad:
            raise ValueError(f"unknown render kinds: {', '.join(sorted(bad))}")
        stem = Path(args.output) if args.output else pred_path
        pred_map = (
            pred
            if isinstance(pred, np.ndarray)
            else reconstruct_params(
                pred, gt.shape[0], gt.shape[1], clamp=True
            )
        )
        renderers = {
            "diffuse": render_diffuse_sphere,
            "mirror": render_mirror_sphere,
        }
        for kind in kinds:
            for side, env in (("pred", pred_map), ("gt", gt)):
                img = renderers[kind](env, out_size=args.render_size)
                img = np.maximum(img, 0.0)
                path = stem.with_suffix(f".{side}-{kind}.png")
                write_preview_png(path, tonemap(img))
    return 0


def cmd_info(args):
    failures = 0
    for raw in args.inputs:
        p = Path(raw)
        try:
            if p.suffix.lower() == ".json":
                params = read_params(p)
                print(f"{p}: parameter file")
                print(f"  sh order {params.order} ({3 * params.sh_coeffs.shape[1]} values)")
                print(
                    f"  sg n {params.sg.n}, s {params.sg.s}, e {params.sg.e},"
                    f" nonzero p {int(np.count_nonzero(params.sg.p))}"
                )
                print(
                    f"  anchors {params.anchors.n} (k_nn {params.anchors.k_nn},"
                    f" {params.anchors.generator})"
                )
                if params.meta:
                    for k in sorted(params.meta):
                        print(f"  meta.{k} = {params.meta[k]}")
            else:
                img = read_map(p)
                print(f"{p}: radiance map {img.shape[1]}x{img.shape[0]}")
                print(
                    f"  min {img.min():.6g}, max {img.max():.6g},"
                    f" mean {img.mean():.6g}"
                )
        except Exception as exc:
            failures += 1
            print(f"error: {p}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def _default_jobs():
    try:
        return max(1, int(os.environ.get("LUMIPARAM_JOBS", "1")))
    except ValueError:
        return 1


def _parser():
    parser = argparse.ArgumentParser(
        prog="lumiparam",
        description=(
            "Decompose equirectangular HDR panoramas into joint "
            "spherical-harmonic + spherical-Gaussian illumination "
            "parameters, reconstruct maps, and evaluate fidelity."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dec = sub.add_parser(
        "decompose", help="panoramas (.hdr/.pfm) -> parameter files"
    )
    p_dec.add_argument("inputs", nargs="*", help="map files or directories")
    p_dec.add_argument("-o", "--output", help="output file or directory")
    _add_config_flags(p_dec)
    p_dec.add_argument(
        "--sparsify", action="store_true", help="sparsify P after decomposing"
    )
    p_dec.add_argument(
        "--preview", action="store_true", help="also write a tonemapped PNG"
    )
    p_dec.add_argument(
        "--jobs", type=int, default=_default_jobs(), help="parallel workers"
    )
    p_dec.set_defaults(func=cmd_decompose)

    p_rec = sub.add_parser("reconstruct", help="parameter file -> map")
    p_rec.add_argument("paramfile")
    p_rec.add_argument("-o", "--output", help="output map (.hdr or .pfm)")
    p_rec.add_argument("--width", type=int)
    p_rec.add_argument("--height", type=int)
    p_rec.add_argument(
        "--preview", action="store_true", help="also write a tonemapped PNG"
    )
    p_rec.set_defaults(func=cmd_reconstruct)

    p_spa = sub.add_parser(
        "sparsify", help="sparsify the distribution in a parameter file"
    )
    p_spa.add_argument("paramfile")
    p_spa.add_argument("-o", "--output")
    p_spa.set_defaults(func=cmd_sparsify)

    p_eval = sub.add_parser(
        "eval", help="score a prediction (map or parameter file) against a map"
    )
    p_eval.add_argument("pred", help="predicted map or parameter file")
    p_eval.add_argument("gt", help="reference map")
    p_eval.add_argument("-o", "--output", help="write the JSON report here")
    _add_config_flags(p_eval)
    p_eval.add_argument(
        "--render",
        help="comma-separated sphere renders to write (diffuse,mirror)",
    )
    p_eval.add_argument("--render-size", type=int, default=32)
    p_eval.add_argument(
        "--sml-epsilon",
        type=float,
        default=None,
        help="include the transport loss at this regularization",
    )
    p_eval.set_defaults(func=cmd_eval)

    p_info = sub.add_parser("info", help="summarize maps or parameter files")
    p_info.add_argument("inputs", nargs="+")
    p_info.set_defaults(func=cmd_info)

    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
