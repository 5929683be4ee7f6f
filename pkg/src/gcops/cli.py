"""Command line interface.

One executable, one job per subcommand:

- ``test``      independence test on one image pair
- ``scan``      windowed tests over a grid or random placement, CSV output
- ``map``       windowed tests plus a smoothed score field (TIFF + preview)
- ``shift``     frame sequences tested over relative temporal shifts
- ``simulate``  synthetic benchmarks (correlated level sets, spot images)
- ``segment``   standalone thresholding
- ``oracle``    slow reference computations and diagnostics

Exit codes: 0 success, 1 input/output failure, 2 degenerate data (a test
could not be computed on this input), 3 invalid usage or parameters.

Thread count is controlled only by the ``GCOPS_THREADS`` environment
variable; there is no flag, so scripted runs stay reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .covariance import DELTA_THRESHOLD, autocov
from .errors import (
    DegenerateChannel,
    DegenerateHistogram,
    DomainError,
    EmbeddingFailure,
    EmptyRegion,
    GcopsError,
    LagTooLarge,
    LengthMismatch,
    NonPositiveVariance,
    NoScores,
    RegionMismatch,
    TooFewBlocks,
    WindowLargerThanImage,
    ZeroVariance,
)
from .fields import BinaryField
from .imageio import (
    load_frames,
    load_image,
    load_mask,
    report_to_text,
    save_mask,
    save_score_field,
    save_score_preview,
    write_csv,
    write_json,
    write_report_json,
    write_text,
)
from .oracles import autocov_bruteforce, permutation_test, variance_check
from .segment import otsu, threshold
from .simulate import (
    LevelSetParams,
    SpotParams,
    simulate_level_sets,
    simulate_spots,
    spawn_rngs,
)
from .testing import gcops_test
from .windows import (
    DEFAULT_BANDWIDTH,
    DEFAULT_LEVEL,
    DEFAULT_STRIDE,
    ScanResult,
    WindowSpec,
    default_window_size,
    scan,
    shift_scan,
    smooth_scores,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_DEGENERATE = 2
EXIT_USAGE = 3

_DEGENERATE_ERRORS = (
    DegenerateChannel,
    NonPositiveVariance,
    EmptyRegion,
    DegenerateHistogram,
    ZeroVariance,
    NoScores,
)


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this tool reserves 2 for
    degenerate data, so usage problems are raised and mapped to 3."""

    def error(self, message):
        raise CliUsageError(message)


def parse_dims(text: str) -> tuple[int, ...]:
    """Parse WIDTHxHEIGHT or WIDTHxHEIGHTxDEPTH into array axis order.

    Files and screens use x,y(,z); arrays use (rows, cols) in 2D and
    (pages, rows, cols) in 3D, so the order is reversed here once and the
    rest of the package only ever sees array order.
    """
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise ValueError(f"bad dimension string {text!r}, expected e.g. 256x256")
    if len(parts) not in (2, 3) or any(p < 1 for p in parts):
        raise ValueError(f"bad dimension string {text!r}, expected e.g. 256x256")
    return tuple(reversed(parts))


def parse_offsets(text: str) -> tuple[float, ...]:
    """Parse a comma-separated x,y or x,y,z offset into array axis order."""
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise ValueError(f"bad offset string {text!r}, expected e.g. 3,0")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad offset string {text!r}, expected e.g. 3,0")
    return tuple(reversed(parts))


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {value!r}")


def _apply_config(path: str, leaf: argparse.ArgumentParser) -> None:
    """Turn key=value lines into parser defaults; explicit flags still win."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    actions = {
        a.dest: a
        for a in leaf._actions
        if a.option_strings and a.dest not in ("help", "config")
    }
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{ln}: expected key=value, got {raw!r}")
        dest = key.strip().replace("-", "_")
        value = value.strip()
        action = actions.get(dest)
        if action is None:
            raise ValueError(f"{path}:{ln}: unknown option {key.strip()!r}")
        if action.nargs == 0:
            typed = _parse_bool(value)
        elif action.type is not None:
            typed = action.type(value)
        elif isinstance(action.default, int):
            typed = int(value)
        elif isinstance(action.default, float):
            typed = float(value)
        else:
            typed = value
        leaf.set_defaults(**{dest: typed})


# -- segmentation common to the image-pair commands -------------------------


def _segmentation_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--binary",
        action="store_true",
        help="inputs are masks already, any nonzero pixel is foreground",
    )
    group.add_argument(
        "--threshold",
        default=None,
        help="fixed intensity threshold; one value for both channels "
        "or two comma-separated values",
    )
    group.add_argument(
        "--otsu",
        action="store_true",
        help="per-channel automatic threshold (default for grayscale input)",
    )
    parser.add_argument(
        "--roi",
        default=None,
        help="optional mask image restricting the analysis region",
    )


def _channel_thresholds(args) -> tuple[float | None, float | None]:
    if args.threshold is None:
        return (None, None)
    parts = [float(p) for p in str(args.threshold).split(",")]
    if len(parts) == 1:
        return (parts[0], parts[0])
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise ValueError("--threshold takes one value or two comma-separated values")


def _load_region(args) -> np.ndarray | None:
    return load_mask(args.roi) if args.roi else None


def _to_field(image: np.ndarray, args, tau: float | None, region) -> BinaryField:
    if args.binary:
        mask = image != 0
        if region is not None:
            if region.shape != mask.shape:
                raise RegionMismatch(
                    f"roi shape {region.shape} does not match image {mask.shape}"
                )
            mask = mask & region
            return BinaryField(mask=mask, region=region)
        return BinaryField.from_mask(mask)
    if tau is None:
        sample = image[region] if region is not None else image
        tau = otsu(sample)
    return threshold(image, tau, region=region)


def _load_pair(args) -> tuple[BinaryField, BinaryField]:
    region = _load_region(args)
    tau_a, tau_b = _channel_thresholds(args)
    a = _to_field(load_image(args.image_a), args, tau_a, region)
    b = _to_field(load_image(args.image_b), args, tau_b, region)
    return a, b


def _test_options(args) -> dict:
    return {
        "delta": args.delta,
        "max_lag": args.max_lag,
        "delta_threshold": args.delta_threshold,
        "delta_mode": args.delta_mode,
    }


# -- subcommand bodies -------------------------------------------------------


def _cmd_test(args) -> int:
    a, b = _load_pair(args)
    start = time.perf_counter()
    report = gcops_test(a, b, **_test_options(args))
    runtime = time.perf_counter() - start
    text = report_to_text(report) + f"\nruntime_s={runtime:.6f}"
    print(text)
    if args.out:
        write_text(args.out, text + "\n")
    if args.json:
        write_report_json(args.json, report, extra={"runtime_s": runtime})
    return EXIT_OK


def _window_spec(args, dims: int) -> WindowSpec:
    size = args.window if args.window is not None else default_window_size(dims)
    if args.random is not None:
        return WindowSpec(
            size=size,
            stride=args.stride,
            placement="random",
            count=args.random,
            seed=args.seed,
        )
    return WindowSpec(size=size, stride=args.stride)


def _scan_header(dims: int) -> list[str]:
    header = ["index"]
    header += [f"o{i}" for i in range(dims)]
    header += [f"c{i}" for i in range(dims)]
    header += [
        "status",
        "reason",
        "n",
        "p1_hat",
        "p2_hat",
        "p12_hat",
        "d_hat",
        "delta",
        "s_hat",
        "t",
        "p_bilateral",
        "p_coloc",
        "p_anticoloc",
        "hit",
    ]
    return header


def _scan_rows(result: ScanResult) -> list[list]:
    rows = []
    for i, e in enumerate(result.entries):
        row: list = [i, *e.origin, *e.center]
        if e.ok:
            r = e.report
            row += [
                "ok",
                "",
                r.stats.n,
                r.stats.p1_hat,
                r.stats.p2_hat,
                r.stats.p12_hat,
                r.stats.d_hat,
                r.delta,
                r.s_hat,
                r.t,
                r.p_bilateral,
                r.p_coloc,
                r.p_anticoloc,
                int(r.p_coloc < result.level),
            ]
        else:
            row += ["skipped", e.skip_reason] + [None] * 11 + [0]
        rows.append(row)
    return rows


def _print_scan_summary(result: ScanResult) -> None:
    print(
        f"windows={len(result.entries)} completed={len(result.completed)} "
        f"skipped={len(result.skipped)} hits={len(result.hits)}"
    )


def _cmd_scan(args) -> int:
    a, b = _load_pair(args)
    spec = _window_spec(args, a.dims)
    result = scan(a, b, spec, level=args.level, **_test_options(args))
    write_csv(args.out, _scan_header(a.dims), _scan_rows(result))
    _print_scan_summary(result)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_map(args) -> int:
    a, b = _load_pair(args)
    spec = _window_spec(args, a.dims)
    result = scan(a, b, spec, level=args.level, **_test_options(args))
    smoothed = smooth_scores(result, bandwidth=args.bandwidth)
    field_path = args.out + ".tif"
    preview_path = args.out + ".png"
    save_score_field(field_path, smoothed)
    save_score_preview(preview_path, smoothed)
    _print_scan_summary(result)
    print(f"wrote {field_path}")
    print(f"wrote {preview_path}")
    if args.csv:
        csv_path = args.out + ".csv"
        write_csv(csv_path, _scan_header(a.dims), _scan_rows(result))
        print(f"wrote {csv_path}")
    return EXIT_OK


def _load_sequence(path, args, tau: float | None, region) -> list[BinaryField]:
    return [_to_field(frame, args, tau, region) for frame in load_frames(path)]


def _cmd_shift(args) -> int:
    region = _load_region(args)
    tau_a, tau_b = _channel_thresholds(args)
    seq_a = _load_sequence(args.image_a, args, tau_a, region)
    seq_b = _load_sequence(args.image_b, args, tau_b, region)
    curve = shift_scan(seq_a, seq_b, max_shift=args.max_shift, **_test_options(args))
    rows = []
    for i, dt in enumerate(curve.shifts):
        scores = curve.frame_scores[i]
        if scores:
            arr = np.asarray(scores)
            sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else math.nan
            stats = [float(arr.mean()), sd, float(arr.min()), float(arr.max())]
        else:
            stats = [math.nan] * 4
        rows.append([dt, len(scores), *stats, curve.skipped[i]])
    write_csv(
        args.out,
        ["shift", "frames", "mean", "sd", "min", "max", "skipped"],
        rows,
    )
    print(f"peak_shift={curve.peak_shift}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _params_dict(params) -> dict:
    record = dataclasses.asdict(params)
    for key, value in record.items():
        if isinstance(value, tuple):
            record[key] = list(value)
    if not isinstance(record.get("seed"), (int, type(None))):
        record["seed"] = repr(record["seed"])
    return record


def _cmd_simulate_levelsets(args) -> int:
    shape = args.shape
    params = LevelSetParams(
        shape=shape,
        alpha_x=args.alpha,
        alpha_y=args.alpha_y,
        alpha_eps=args.alpha_eps,
        sigma0=args.sigma0,
        rho0=args.rho0,
        tau1=args.tau,
        tau2=args.tau2,
        seed=args.seed,
    )
    os.makedirs(args.outdir, exist_ok=True)
    ext = ".png" if len(shape) == 2 else ".tif"
    rngs = spawn_rngs(args.seed, args.reps)
    files = []
    analytic = None
    for i, rng in enumerate(rngs):
        a, b, targets = simulate_level_sets(dataclasses.replace(params, seed=rng))
        analytic = targets
        name_a = f"rep{i:03d}_a{ext}"
        name_b = f"rep{i:03d}_b{ext}"
        save_mask(os.path.join(args.outdir, name_a), a.mask)
        save_mask(os.path.join(args.outdir, name_b), b.mask)
        files.append({"rep": i, "a": name_a, "b": name_b})
    sidecar = {
        "kind": "levelsets",
        "axes": "yx" if len(shape) == 2 else "zyx",
        "params": _params_dict(params),
        "analytic": analytic,
        "files": files,
    }
    sidecar["params"]["seed"] = args.seed
    write_json(os.path.join(args.outdir, "simulation.json"), sidecar)
    print(
        f"wrote {args.reps} pair(s) to {args.outdir} "
        f"(analytic rho={analytic['rho']:.6g})"
    )
    return EXIT_OK


def _cmd_simulate_spots(args) -> int:
    shape = args.shape
    shift = parse_offsets(args.shift) if args.shift else None
    params = SpotParams(
        shape=shape,
        n_red=args.n_red,
        n_green=args.n_green,
        forced_fraction=args.forced,
        neighbor_distance=args.neighbor,
        spot_radius=args.spot_sd,
        noise_sd=args.noise_sd,
        shift=shift,
        seed=args.seed,
    )
    os.makedirs(args.outdir, exist_ok=True)
    mask_ext = ".png" if len(shape) == 2 else ".tif"
    rngs = spawn_rngs(args.seed, args.reps)
    files = []
    for i, rng in enumerate(rngs):
        sample = simulate_spots(dataclasses.replace(params, seed=rng))
        names = {
            "red": f"rep{i:03d}_red.tif",
            "green": f"rep{i:03d}_green.tif",
            "red_truth": f"rep{i:03d}_red_truth{mask_ext}",
            "green_truth": f"rep{i:03d}_green_truth{mask_ext}",
        }
        save_score_field(os.path.join(args.outdir, names["red"]), sample.red_image)
        save_score_field(os.path.join(args.outdir, names["green"]), sample.green_image)
        save_mask(os.path.join(args.outdir, names["red_truth"]), sample.red_truth.mask)
        save_mask(
            os.path.join(args.outdir, names["green_truth"]), sample.green_truth.mask
        )
        files.append({"rep": i, **names})
    sidecar = {
        "kind": "spots",
        "axes": "yx" if len(shape) == 2 else "zyx",
        "params": _params_dict(params),
        "analytic": {
            "forced_pairs": int(round(params.forced_fraction * params.n_green)),
        },
        "files": files,
    }
    sidecar["params"]["seed"] = args.seed
    write_json(os.path.join(args.outdir, "simulation.json"), sidecar)
    print(f"wrote {args.reps} pair(s) to {args.outdir}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    image = load_image(args.image)
    if args.threshold is not None:
        tau = float(args.threshold)
    else:
        tau = otsu(image)
    field = threshold(image, tau)
    save_mask(args.out, field.mask)
    print(f"threshold={tau!r}")
    print(f"coverage={float(field.mask.mean()):.6g}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_oracle_autocov(args) -> int:
    region = _load_region(args)
    tau, _ = _channel_thresholds(args)
    field = _to_field(load_image(args.image), args, tau, region)
    fast = autocov(field, max_lag=args.max_lag)
    slow = autocov_bruteforce(field, max_lag=args.max_lag)
    diff = float(np.max(np.abs(fast.values - slow.values)))
    counts_equal = bool(np.array_equal(fast.counts, slow.counts))
    print(f"max_abs_difference={diff:.3e}")
    print(f"counts_equal={int(counts_equal)}")
    return EXIT_OK


def _cmd_oracle_permutation(args) -> int:
    a, b = _load_pair(args)
    p = permutation_test(a, b, block=args.block, reps=args.reps, seed=args.seed)
    print(f"p={p!r}")
    return EXIT_OK


def _cmd_oracle_variance(args) -> int:
    shape = args.shape

    if args.bernoulli is not None:
        coverage = args.bernoulli
        if not 0.0 < coverage < 1.0:
            raise ValueError("--bernoulli takes a coverage in (0, 1)")

        def make_pair(rng):
            a = BinaryField.from_mask(rng.random(shape) < coverage)
            b = BinaryField.from_mask(rng.random(shape) < coverage)
            return a, b

    else:
        params = LevelSetParams(
            shape=shape, alpha_x=args.alpha, rho0=args.rho0, tau1=args.tau
        )

        def make_pair(rng):
            a, b, _ = simulate_level_sets(dataclasses.replace(params, seed=rng))
            return a, b

    report = variance_check(make_pair, reps=args.reps, seed=args.seed)
    for key in ("reps", "n", "var_d", "mean_s_over_n", "ratio", "mean_delta"):
        value = report[key]
        print(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}")
    return EXIT_OK


# -- parser construction -----------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = _Parser(add_help=False)
    common.add_argument(
        "--config",
        default=None,
        help="file of key=value lines applied as defaults (flags still win)",
    )

    knobs = _Parser(add_help=False)
    knobs.add_argument(
        "--delta",
        type=float,
        default=None,
        help="fixed correlation range; estimated from the data when omitted",
    )
    knobs.add_argument(
        "--max-lag",
        type=int,
        default=None,
        help="half-width of the stored lag cube (default min(64, min(shape)//4))",
    )
    knobs.add_argument(
        "--delta-threshold",
        type=float,
        default=DELTA_THRESHOLD,
        help="normalized autocovariance level defining the range (default 0.1)",
    )
    knobs.add_argument(
        "--delta-mode",
        choices=("max", "prefix"),
        default="max",
        help="range rule: farthest qualifying lag, or largest fully "
        "qualifying ball",
    )

    windowing = _Parser(add_help=False)
    windowing.add_argument(
        "--window",
        type=parse_dims,
        default=None,
        help="window size WxH or WxHxD (default 50x50, 50x50x10 in 3D)",
    )
    windowing.add_argument(
        "--stride",
        type=int,
        default=DEFAULT_STRIDE,
        help="grid step in pixels (default 25)",
    )
    windowing.add_argument(
        "--random",
        type=int,
        default=None,
        metavar="COUNT",
        help="place COUNT windows uniformly at random instead of on the grid",
    )
    windowing.add_argument(
        "--seed", type=int, default=None, help="seed for random placement"
    )
    windowing.add_argument(
        "--level",
        type=float,
        default=DEFAULT_LEVEL,
        help="unilateral level defining hits (default 0.05)",
    )

    parser = _Parser(
        prog="gcops",
        description="Independence test between two segmented images.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    leaves: dict[tuple, argparse.ArgumentParser] = {}

    p = sub.add_parser(
        "test",
        parents=[common, knobs],
        help="independence test on one image pair",
    )
    p.add_argument("image_a")
    p.add_argument("image_b")
    _segmentation_options(p)
    p.add_argument("--out", default=None, help="also write the report as text")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=_cmd_test)
    leaves[("test", None)] = p

    p = sub.add_parser(
        "scan",
        parents=[common, knobs, windowing],
        help="windowed tests, one CSV row per window",
    )
    p.add_argument("image_a")
    p.add_argument("image_b")
    _segmentation_options(p)
    p.add_argument("--out", default="scan.csv", help="CSV path (default scan.csv)")
    p.set_defaults(func=_cmd_scan)
    leaves[("scan", None)] = p

    p = sub.add_parser(
        "map",
        parents=[common, knobs, windowing],
        help="windowed tests plus smoothed score field",
    )
    p.add_argument("image_a")
    p.add_argument("image_b")
    _segmentation_options(p)
    p.add_argument(
        "--bandwidth",
        type=float,
        default=DEFAULT_BANDWIDTH,
        help="Gaussian kernel bandwidth in pixels (default 5)",
    )
    p.add_argument(
        "--out",
        default="map",
        help="output prefix for PREFIX.tif and PREFIX.png (default map)",
    )
    p.add_argument(
        "--csv", action="store_true", help="also write the window table as PREFIX.csv"
    )
    p.set_defaults(func=_cmd_map)
    leaves[("map", None)] = p

    p = sub.add_parser(
        "shift",
        parents=[common, knobs],
        help="temporal shift scan over two frame sequences",
    )
    p.add_argument("image_a", help="reference sequence (multipage TIFF, pages=time)")
    p.add_argument("image_b", help="second sequence")
    _segmentation_options(p)
    p.add_argument(
        "--max-shift",
        type=int,
        default=20,
        help="largest relative shift in frames (default 20)",
    )
    p.add_argument("--out", default="shift.csv", help="CSV path (default shift.csv)")
    p.set_defaults(func=_cmd_shift)
    leaves[("shift", None)] = p

    p = sub.add_parser("simulate", help="generate synthetic benchmark data")
    sim = p.add_subparsers(dest="kind", required=True, metavar="KIND")

    q = sim.add_parser(
        "levelsets",
        parents=[common],
        help="thresholded correlated Gaussian random fields",
    )
    q.add_argument("outdir")
    q.add_argument(
        "--shape",
        type=parse_dims,
        default=(250, 250),
        help="image size WxH or WxHxD (default 250x250)",
    )
    q.add_argument("--alpha", type=float, default=8.0, help="range of X (default 8)")
    q.add_argument(
        "--alpha-y", type=float, default=None, help="range of Y (default: alpha)"
    )
    q.add_argument(
        "--alpha-eps",
        type=float,
        default=None,
        help="range of the shared component (default: alpha-y)",
    )
    q.add_argument("--sigma0", type=float, default=1.0)
    q.add_argument(
        "--rho0",
        type=float,
        default=0.0,
        help="latent field correlation in [0, 1) (default 0)",
    )
    q.add_argument(
        "--tau", type=float, default=1.0, help="threshold in sd units (default 1)"
    )
    q.add_argument(
        "--tau2", type=float, default=None, help="threshold of channel 2 (default tau)"
    )
    q.add_argument("--reps", type=int, default=1)
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(func=_cmd_simulate_levelsets)
    leaves[("simulate", "levelsets")] = q

    q = sim.add_parser(
        "spots", parents=[common], help="spot images with optional forced pairs"
    )
    q.add_argument("outdir")
    q.add_argument(
        "--shape", type=parse_dims, default=(256, 256), help="default 256x256"
    )
    q.add_argument("--n-red", type=int, default=100)
    q.add_argument("--n-green", type=int, default=100)
    q.add_argument(
        "--forced",
        type=float,
        default=0.0,
        help="fraction of green spots placed next to a red spot (default 0)",
    )
    q.add_argument(
        "--neighbor",
        type=float,
        default=1.0,
        help="largest center distance of a forced pair in pixels (default 1)",
    )
    q.add_argument(
        "--spot-sd", type=float, default=2.0, help="Gaussian spot sd (default 2)"
    )
    q.add_argument(
        "--noise-sd", type=float, default=0.0, help="additive noise sd (default 0)"
    )
    q.add_argument(
        "--shift",
        default=None,
        help="x,y (or x,y,z) offset added to green centers before rendering",
    )
    q.add_argument("--reps", type=int, default=1)
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(func=_cmd_simulate_spots)
    leaves[("simulate", "spots")] = q

    p = sub.add_parser("segment", parents=[common], help="threshold one image")
    p.add_argument("image")
    seg_group = p.add_mutually_exclusive_group()
    seg_group.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="fixed threshold (default: automatic)",
    )
    seg_group.add_argument(
        "--otsu",
        action="store_true",
        help="histogram-based automatic threshold (the default)",
    )
    p.add_argument("--out", default="mask.png", help="mask path (default mask.png)")
    p.set_defaults(func=_cmd_segment)
    leaves[("segment", None)] = p

    p = sub.add_parser("oracle", help="reference computations and diagnostics")
    orc = p.add_subparsers(dest="kind", required=True, metavar="KIND")

    q = orc.add_parser(
        "autocov",
        parents=[common],
        help="compare FFT and direct-sum autocovariance on one image",
    )
    q.add_argument("image")
    _segmentation_options(q)
    q.add_argument("--max-lag", type=int, default=8)
    q.set_defaults(func=_cmd_oracle_autocov)
    leaves[("oracle", "autocov")] = q

    q = orc.add_parser(
        "permutation",
        parents=[common],
        help="block-permutation baseline on one image pair",
    )
    q.add_argument("image_a")
    q.add_argument("image_b")
    _segmentation_options(q)
    q.add_argument(
        "--block",
        type=parse_dims,
        default=(2, 2),
        help="block size WxH or WxHxD (default 2x2)",
    )
    q.add_argument("--reps", type=int, default=1000)
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(func=_cmd_oracle_permutation)
    leaves[("oracle", "permutation")] = q

    q = orc.add_parser(
        "variance",
        parents=[common],
        help="Monte-Carlo audit of the variance estimate",
    )
    q.add_argument(
        "--bernoulli",
        type=float,
        default=None,
        metavar="P",
        help="iid coverage-P pairs instead of level sets",
    )
    q.add_argument(
        "--shape", type=parse_dims, default=(128, 128), help="default 128x128"
    )
    q.add_argument("--alpha", type=float, default=8.0)
    q.add_argument("--tau", type=float, default=1.0)
    q.add_argument("--rho0", type=float, default=0.0)
    q.add_argument("--reps", type=int, default=200)
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(func=_cmd_oracle_variance)
    leaves[("oracle", "variance")] = q

    return parser, leaves


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, leaves = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            leaf = leaves[(args.command, getattr(args, "kind", None))]
            _apply_config(args.config, leaf)
            args = parser.parse_args(argv)
        return args.func(args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DEGENERATE_ERRORS as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (
        RegionMismatch,
        LagTooLarge,
        WindowLargerThanImage,
        LengthMismatch,
        TooFewBlocks,
        EmbeddingFailure,
        DomainError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as exc:
        name = exc.filename if exc.filename else exc
        print(f"cannot read {name}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except GcopsError as exc:
        # anything package-specific not listed above is a data problem
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
