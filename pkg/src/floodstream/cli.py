"""Command-line entry points: the ``bench`` suite runner and the
``floodstream`` umbrella (serve, profile inspection, calibration)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .bench import (
    BenchError,
    KIB,
    MIB,
    SweepSpec,
    render_rate_map,
)
from .calibration import (
    CalibrationError,
    calibrate_profile,
    load_measured_targets,
    load_profile,
)
from .device import ProfileError
from .rasters import rgba_to_png_bytes
from .stats import StatsError
from .streaming import StreamError

_SCALES = ("desk", "paper")

_ERRORS = (
    BenchError,
    CalibrationError,
    ProfileError,
    StatsError,
    StreamError,
    OSError,
    ValueError,
)


def _write_report(report, out: str | None) -> None:
    if not out:
        return
    path = Path(out)
    if path.suffix == ".csv":
        path.write_text(report.to_csv())
    elif path.suffix == ".json":
        path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    else:
        raise BenchError(f"--out must end in .csv or .json, got {out!r}")
    print(f"wrote {path}")


def _add_common(sub: argparse.ArgumentParser, default_profile: str) -> None:
    sub.add_argument(
        "--profile",
        default=default_profile,
        help=f"profile name or JSON path (default: {default_profile})",
    )
    sub.add_argument("--out", help="write the report to a .csv or .json file")
    sub.add_argument(
        "--scale",
        choices=_SCALES,
        default="desk",
        help="desk: quick defaults; paper: full-size suites (default: desk)",
    )
    sub.add_argument("--seed", type=int, default=0, help="sample RNG seed")


def bench_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench", description="Run benchmark suites against a device profile."
    )
    subs = parser.add_subparsers(dest="suite", required=True)

    transfer = subs.add_parser("transfer", help="buffer copy rate across sizes")
    _add_common(transfer, "measured-reference")
    transfer.add_argument("--min-bytes", type=int, default=64 * KIB)
    transfer.add_argument("--max-bytes", type=int, default=64 * MIB)
    transfer.add_argument("--step-bytes", type=int, default=64 * KIB)
    transfer.add_argument("--repeats", type=int, default=100)

    dual = subs.add_parser("dual", help="four-strategy pipeline suite")
    _add_common(dual, "measured-reference")
    dual.add_argument(
        "--dims",
        action="append",
        help="image size (2k/4k/8k/16k or WxH); repeatable",
    )
    dual.add_argument(
        "--n", action="append", type=int, help="batch size N; repeatable"
    )
    dual.add_argument("--repeats", type=int, default=100)
    dual.add_argument("--noise", type=float, default=bench_mod.DEFAULT_NOISE)

    sweep = subs.add_parser("sweep", help="transform-rate sweep over dimensions")
    _add_common(sweep, "synthetic-default")
    sweep.add_argument("--start", type=int, default=128)
    sweep.add_argument("--step", type=int, default=128)
    sweep.add_argument(
        "--max", type=int, help="default: 4096 (desk) or 16384 (paper)"
    )
    sweep.add_argument("--repeats", type=int, default=1)
    sweep.add_argument("--cell-cap", type=int, default=40_000)
    sweep.add_argument("--map", help="write the rendered rate map PNG here")

    kernels = subs.add_parser("kernels", help="kernel-variant comparison")
    _add_common(kernels, "measured-reference")
    kernels.add_argument("--dims", default="4k")
    kernels.add_argument("--iterations", type=int, default=10_000)

    ttest = subs.add_parser("ttest", help="1b-final vs 2b-final significance")
    _add_common(ttest, "measured-reference")
    ttest.add_argument("--dims", default="8k")
    ttest.add_argument("--n", type=int, help="default: 1000 (desk), 10000 (paper)")
    ttest.add_argument("--repeats", type=int, default=100)
    ttest.add_argument("--noise", type=float, default=bench_mod.DEFAULT_NOISE)

    backends = subs.add_parser("backends", help="compare pixel-kernel backends")
    backends.add_argument("--pixels", type=int, default=1 << 20)
    backends.add_argument("--surfaces", type=int, default=16)
    backends.add_argument("--repeats", type=int, default=3)
    backends.add_argument("--seed", type=int, default=0)
    backends.add_argument("--out", help="write the report to a .csv or .json file")

    args = parser.parse_args(argv)
    try:
        return _run_bench(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _run_bench(args) -> int:
    if args.suite == "backends":
        report = bench_mod.run_backend_comparison(
            pixels=args.pixels,
            n_surfaces=args.surfaces,
            repeats=args.repeats,
            seed=args.seed,
        )
        for row in report.rows:
            print(
                f"{row['backend']:>7}: {row['mpix_per_s']:.1f} Mpx/s "
                f"({row['best_s'] * 1e3:.2f} ms best of {args.repeats})"
            )
        _write_report(report, args.out)
        return 0

    profile = load_profile(args.profile)
    paper = args.scale == "paper"

    if args.suite == "transfer":
        report = bench_mod.run_transfer_baseline(
            profile,
            min_bytes=args.min_bytes,
            max_bytes=args.max_bytes,
            step_bytes=args.step_bytes,
            repeats=args.repeats,
        )
        last = report.rows[-1]
        print(
            f"{len(report.rows)} sizes; rate at {last['bytes']} B: "
            f"{last['rate_gbps']:.3f} GB/s"
        )
    elif args.suite == "dual":
        dims = args.dims or (["2k", "4k", "8k", "16k"] if paper else ["2k", "4k", "8k"])
        n_list = args.n or ([10, 100, 1000, 10000] if paper else [10, 100, 1000])
        report = bench_mod.run_dual_buffer_suite(
            profile,
            dims,
            n_list,
            repeats=args.repeats,
            seed=args.seed,
            noise=args.noise,
        )
        for row in report.rows:
            if row.get("unsupported"):
                print(f"{row['dims']:>10} {row['variant']:>10}  unsupported")
            else:
                print(
                    f"{row['dims']:>10} {row['variant']:>10} n={row['n']:<6} "
                    f"{row['total_us']:>12} us  eff {100 * row['efficiency']:6.2f}%"
                )
    elif args.suite == "sweep":
        spec = SweepSpec(
            start=args.start,
            step=args.step,
            max=args.max if args.max is not None else (16384 if paper else 4096),
            repeats=args.repeats,
        )
        rmap = bench_mod.run_transform_sweep(profile, spec, cell_cap=args.cell_cap)
        print(
            f"{rmap.spec.cells} cells; rates "
            f"{rmap.rates.min():.3f}..{rmap.rates.max():.3f} GB/s"
        )
        if args.map:
            Path(args.map).write_bytes(rgba_to_png_bytes(render_rate_map(rmap)))
            print(f"wrote {args.map}")
        if args.out:
            path = Path(args.out)
            if path.suffix == ".csv":
                path.write_text(rmap.to_csv())
            elif path.suffix == ".json":
                path.write_text(json.dumps(rmap.to_json(), indent=2) + "\n")
            else:
                raise BenchError(f"--out must end in .csv or .json, got {args.out!r}")
            print(f"wrote {path}")
        return 0
    elif args.suite == "kernels":
        report = bench_mod.run_kernel_comparison(
            profile, dims=args.dims, iterations=args.iterations
        )
        for row in report.rows:
            print(
                f"{row['variant']:>8}: avg {row['avg_us']:>6} us, "
                f"total {row['total_us']} us"
            )
        print(
            "fastest image kernel is "
            f"{report.summary['image_vs_buffer_speedup_pct']:.2f}% faster than "
            "the fastest buffer kernel"
        )
    else:  # ttest
        n = args.n or (10000 if paper else 1000)
        report = bench_mod.run_ttest_suite(
            profile,
            dims=args.dims,
            n=n,
            repeats=args.repeats,
            seed=args.seed,
            noise=args.noise,
        )
        row = report.rows[0]
        print(
            f"{row['a']} vs {row['b']} at {row['dims']}, n={row['n']}: "
            f"t = {row['t']:.2f}, p = {row['p']:.3e}"
        )

    _write_report(report, args.out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="floodstream",
        description="Flood-surface streaming analytics service and tools.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    serve = subs.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--data", help="data directory (or FLOODSTREAM_DATA)")
    serve.add_argument("--bind", help="host:port (or FLOODSTREAM_BIND)")
    serve.add_argument("--profile", help="default device profile name/path")
    serve.add_argument("--variant", help="snapshot streaming strategy")

    profile = subs.add_parser("profile", help="print a device profile as JSON")
    profile.add_argument("name", help="profile name or path")
    profile.add_argument("--out", help="write to a file instead of stdout")

    calibrate = subs.add_parser(
        "calibrate", help="fit a profile to a measurement-target table"
    )
    calibrate.add_argument(
        "--targets", help="targets JSON (default: the bundled measured table)"
    )
    calibrate.add_argument("--out", help="write the fitted profile JSON here")
    calibrate.add_argument(
        "--residuals", action="store_true", help="print the residual report"
    )

    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return _serve(args)
        if args.command == "profile":
            doc = load_profile(args.name).to_json()
            text = json.dumps(doc, indent=2) + "\n"
            if args.out:
                Path(args.out).write_text(text)
                print(f"wrote {args.out}")
            else:
                print(text, end="")
            return 0
        # calibrate
        if args.targets:
            targets = json.loads(Path(args.targets).read_text())
        else:
            targets = load_measured_targets()
        result = calibrate_profile(targets)
        if args.residuals:
            print(result.residual_report(), end="")
        if args.out:
            result.profile.save(args.out)
            print(f"wrote {args.out}")
        worst = max(
            (abs(r.pct_error) for r in result.residuals if r.target), default=0.0
        )
        print(f"profile {result.profile.name!r}: worst residual {worst:.3f}%")
        return 0
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _serve(args) -> int:
    import os

    import uvicorn

    from .service import create_app

    bind = args.bind or os.environ.get("FLOODSTREAM_BIND", "127.0.0.1:8000")
    host, _, port_s = bind.rpartition(":")
    if not host or not port_s.isdigit():
        raise ValueError(f"--bind must be host:port, got {bind!r}")
    app = create_app(data_dir=args.data, profile=args.profile, variant=args.variant)
    uvicorn.run(app, host=host, port=int(port_s))
    return 0


if __name__ == "__main__":
    sys.exit(main())
