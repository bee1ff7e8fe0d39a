"""Benchmark suites over a device profile, plus the rate-map renderer.

Every suite produces a :class:`BenchReport` (JSON/CSV serializable, fixed
row order) and is deterministic given the seed.  Simulated durations carry
no noise of their own; the dual-buffer suite attaches per-repeat samples
with a small seeded multiplicative jitter so that downstream significance
tests have measurement-like spread to work with, while headline totals stay
noiseless.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .device import (
    DeviceProfile,
    KERNEL_VARIANTS,
    UnsupportedImageSize,
    round_half_up,
    transfer_time,
    transform_time,
    kernel_time,
)
from .stats import welch_t_test
from .streaming import (
    VARIANTS,
    StreamJob,
    Variant,
    simulate_stream_timing,
)

KIB = 1024
MIB = 1024 * 1024

# Test-image pyramid; each step quadruples the pixel count.
DIMS = {
    "2k": (1856, 2208),
    "4k": (3712, 4416),
    "8k": (7424, 8832),
    "16k": (14848, 17664),
}

DEFAULT_NOISE = 1e-3


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """Square sweep over image dimensions: start..max in fixed steps."""

    start: int
    step: int
    max: int
    repeats: int = 1

    def __post_init__(self) -> None:
        if self.start < 1 or self.step < 1:
            raise BenchError("sweep start and step must be >= 1")
        if self.max < self.start:
            raise BenchError("sweep max must be >= start")
        if self.repeats < 1:
            raise BenchError("sweep repeats must be >= 1")

    @property
    def points(self) -> list[int]:
        return list(range(self.start, self.max + 1, self.step))

    @property
    def cells(self) -> int:
        return len(self.points) ** 2


@dataclass
class RateMap:
    """Transform rates (GB/s) over a dimension sweep.

    ``rates[r, c]`` is the rate for width ``start + c*step`` and height
    ``start + r*step``; row 0 is the smallest height (bottom-left origin
    when rendered).
    """

    spec: SweepSpec
    rates: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n = len(self.spec.points)
        if self.rates.shape != (n, n):
            raise BenchError(
                f"rate grid shape {self.rates.shape} does not match spec "
                f"({n}x{n})"
            )

    def to_json(self) -> dict:
        return {
            "spec": {
                "start": self.spec.start,
                "step": self.spec.step,
                "max": self.spec.max,
                "repeats": self.spec.repeats,
            },
            "rates": [[float(v) for v in row] for row in self.rates],
        }

    @staticmethod
    def from_json(doc: dict) -> "RateMap":
        spec = SweepSpec(**doc["spec"])
        return RateMap(spec=spec, rates=np.asarray(doc["rates"], dtype=np.float64))

    def to_csv(self) -> str:
        """Rows in calibration-CSV form: ``width,height,rate_gbps``."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["width", "height", "rate_gbps"])
        points = self.spec.points
        for r, h in enumerate(points):
            for c, w in enumerate(points):
                writer.writerow([w, h, repr(float(self.rates[r, c]))])
        return buf.getvalue()


@dataclass
class BenchReport:
    suite: str
    rows: list[dict]
    environment: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    csv_columns: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "rows": self.rows,
            "environment": self.environment,
            "summary": self.summary,
            "csv_columns": self.csv_columns,
        }

    @staticmethod
    def from_json(doc: dict) -> "BenchReport":
        return BenchReport(
            suite=doc["suite"],
            rows=list(doc["rows"]),
            environment=dict(doc.get("environment", {})),
            summary=dict(doc.get("summary", {})),
            csv_columns=list(doc.get("csv_columns", [])),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.csv_columns)
        for row in self.rows:
            if row.get("unsupported"):
                continue
            writer.writerow([row.get(col, "") for col in self.csv_columns])
        return buf.getvalue()


def resolve_dims(entry) -> tuple[str, int, int]:
    """Accept '4k', 'WxH', or a (width, height) pair; return (label, w, h)."""
    if isinstance(entry, str):
        if entry in DIMS:
            w, h = DIMS[entry]
            return entry, w, h
        if "x" in entry:
            try:
                w_s, h_s = entry.lower().split("x", 1)
                return entry, int(w_s), int(h_s)
            except ValueError:
                pass
        raise BenchError(f"unknown image size {entry!r}")
    w, h = entry
    return f"{w}x{h}", int(w), int(h)


def _jitter_samples(
    total_us: int, repeats: int, rng: np.random.Generator, sigma: float
) -> list[int]:
    if sigma == 0.0:
        return [total_us] * repeats
    zs = rng.standard_normal(repeats)
    return [max(1, round_half_up(total_us * (1.0 + sigma * z))) for z in zs]


def run_transfer_baseline(
    profile: DeviceProfile,
    min_bytes: int = 64 * KIB,
    max_bytes: int = 64 * MIB,
    step_bytes: int = 64 * KIB,
    repeats: int = 100,
) -> BenchReport:
    """Buffer-to-buffer copy rate at every size in [min, max].

    Simulated durations are deterministic, so the mean over repeats equals
    any single run; the repeat count is kept in the report for parity with
    measured backends.
    """
    if min_bytes < 1 or step_bytes < 1:
        raise BenchError("sizes and step must be >= 1")
    if min_bytes > max_bytes:
        raise BenchError("min size must not exceed max size")
    if repeats < 1:
        raise BenchError("repeats must be >= 1")
    rows = []
    for size in range(min_bytes, max_bytes + 1, step_bytes):
        t_us = transfer_time(profile, size)
        rows.append(
            {
                "bytes": size,
                "time_us": t_us,
                "rate_gbps": size / t_us / 1000.0 if t_us else float(size),
                "repeats": repeats,
            }
        )
    return BenchReport(
        suite="transfer",
        rows=rows,
        environment={"profile": profile.name},
        csv_columns=["bytes", "time_us", "rate_gbps"],
    )


def run_dual_buffer_suite(
    profile: DeviceProfile,
    dims_list,
    n_list,
    repeats: int = 100,
    *,
    seed: int = 0,
    noise: float = DEFAULT_NOISE,
) -> BenchReport:
    """Totals, rates and efficiencies for all four strategies.

    Row order: dims in the given order, then the four strategies, then N in
    the given order.  Dimensions over the profile's image limit produce a
    row marked ``unsupported`` instead of timings.  Each supported row
    carries ``samples_us``: per-repeat totals with seeded multiplicative
    noise (sigma = ``noise``), whose child seed depends only on the row key
    so subsetting the suite never reshuffles them.
    """
    if not dims_list or not n_list:
        raise BenchError("dims and n lists must be nonempty")
    if repeats < 1:
        raise BenchError("repeats must be >= 1")
    rows = []
    for entry in dims_list:
        label, w, h = resolve_dims(entry)
        for v_index, variant in enumerate(VARIANTS):
            for n in n_list:
                if n < 1:
                    raise BenchError("N values must be >= 1")
                base = {
                    "dims": label,
                    "width": w,
                    "height": h,
                    "variant": variant.value,
                    "n": n,
                }
                try:
                    profile.check_image_dims(w, h)
                except UnsupportedImageSize as exc:
                    rows.append({**base, "unsupported": True, "reason": str(exc)})
                    continue
                job = StreamJob(
                    variant=variant, n=n, width=w, height=h, profile=profile
                )
                report = simulate_stream_timing(job)
                rng = np.random.default_rng((seed, w, h, n, v_index))
                samples = _jitter_samples(
                    report.total_time_us, repeats, rng, noise
                )
                rows.append(
                    {
                        **base,
                        "total_us": report.total_time_us,
                        "rate_gbps": report.transfer_rate_gbps,
                        "efficiency": report.efficiency,
                        "warmup": report.warmup,
                        "contention_applied": report.contention_applied,
                        "samples_us": samples,
                    }
                )
    return BenchReport(
        suite="dual",
        rows=rows,
        environment={
            "profile": profile.name,
            "seed": seed,
            "noise": noise,
            "repeats": repeats,
        },
        csv_columns=[
            "variant",
            "n",
            "width",
            "height",
            "total_us",
            "rate_gbps",
            "efficiency",
        ],
    )


def run_transform_sweep(
    profile: DeviceProfile, spec: SweepSpec, *, cell_cap: int = 40_000
) -> RateMap:
    """Measure the transform rate at every (width, height) in the sweep.

    Rates derive from the integer-µs simulated duration (durations under
    the 1 µs resolution read as 1 µs).  The cell cap keeps accidental
    full-scale sweeps out of quick runs; paper-scale grids need about
    27,000 cells, the default cap clears that.
    """
    if spec.cells > cell_cap:
        raise BenchError(
            f"sweep would cover {spec.cells} cells (cap {cell_cap}); "
            "reduce max or enlarge step, or raise cell_cap"
        )
    points = spec.points
    if points and points[-1] > profile.image_dim_limit:
        raise BenchError(
            f"sweep max {points[-1]} exceeds device image limit "
            f"{profile.image_dim_limit}"
        )
    n = len(points)
    rates = np.zeros((n, n), dtype=np.float64)
    for r, h in enumerate(points):
        for c, w in enumerate(points):
            t_us = max(transform_time(profile, w, h), 1)
            rates[r, c] = w * h / t_us / 1000.0
    return RateMap(spec=spec, rates=rates)


def render_rate_map(rmap: RateMap) -> np.ndarray:
    """RGBA pixels for a rate map: 32-step grey ramp, blue above 32 GB/s.

    One pixel per cell; the bottom-left pixel is the (start, start) cell.
    Rates v in [0, 32) land on grey step k = floor(v) (white at step 0,
    black at step 31); anything above 32 GB/s is drawn pure blue.
    """
    n = len(rmap.spec.points)
    out = np.zeros((n, n, 4), dtype=np.uint8)
    for r in range(n):
        for c in range(n):
            v = float(rmap.rates[r, c])
            row = n - 1 - r  # bottom-left origin
            if v > 32.0:
                out[row, c] = (0, 0, 255, 255)
            else:
                k = min(int(v), 31)
                grey = round(255.0 * (1.0 - k / 31.0))
                out[row, c] = (grey, grey, grey, 255)
    return out


def run_kernel_comparison(
    profile: DeviceProfile,
    dims=DIMS["4k"],
    iterations: int = 10_000,
) -> BenchReport:
    """Average/total runtimes of the four kernel flavours, plus the speedup
    of the fastest image-backed kernel over the fastest buffer-backed one."""
    if iterations < 1:
        raise BenchError("iterations must be >= 1")
    label, w, h = resolve_dims(dims)
    rows = []
    for variant in KERNEL_VARIANTS:
        avg = kernel_time(profile, variant, w, h)
        rows.append(
            {
                "variant": variant,
                "avg_us": avg,
                "total_us": avg * iterations,
            }
        )
    fastest_image = min(r["avg_us"] for r in rows if r["variant"].startswith("image"))
    fastest_buffer = min(
        r["avg_us"] for r in rows if r["variant"].startswith("buffer")
    )
    speedup_pct = 100.0 * (fastest_buffer - fastest_image) / fastest_buffer
    return BenchReport(
        suite="kernels",
        rows=rows,
        environment={
            "profile": profile.name,
            "dims": label,
            "iterations": iterations,
        },
        summary={
            "fastest_image_us": fastest_image,
            "fastest_buffer_us": fastest_buffer,
            "image_vs_buffer_speedup_pct": speedup_pct,
        },
        csv_columns=["variant", "avg_us", "total_us"],
    )


def run_ttest_suite(
    profile: DeviceProfile,
    dims="8k",
    n: int = 1000,
    repeats: int = 100,
    *,
    seed: int = 0,
    noise: float = DEFAULT_NOISE,
) -> BenchReport:
    """Significance of the 1b-final vs 2b-final difference at one size."""
    suite = run_dual_buffer_suite(
        profile, [dims], [n], repeats, seed=seed, noise=noise
    )
    by_variant = {
        row["variant"]: row for row in suite.rows if not row.get("unsupported")
    }
    try:
        row_a = by_variant[Variant.ONE_BUFFER_FINAL.value]
        row_b = by_variant[Variant.TWO_BUFFER_FINAL.value]
    except KeyError:
        raise BenchError(
            f"image size {resolve_dims(dims)[0]!r} is unsupported by "
            f"profile {profile.name!r}"
        ) from None
    t_stat, p_value = welch_t_test(row_a["samples_us"], row_b["samples_us"])
    rows = [
        {
            "a": row_a["variant"],
            "b": row_b["variant"],
            "dims": row_a["dims"],
            "n": n,
            "mean_a_us": sum(row_a["samples_us"]) / repeats,
            "mean_b_us": sum(row_b["samples_us"]) / repeats,
            "t": t_stat,
            "p": p_value,
        }
    ]
    return BenchReport(
        suite="ttest",
        rows=rows,
        environment={
            "profile": profile.name,
            "seed": seed,
            "noise": noise,
            "repeats": repeats,
        },
        csv_columns=["a", "b", "dims", "n", "mean_a_us", "mean_b_us", "t", "p"],
    )


def run_backend_comparison(
    pixels: int = 1 << 20,
    n_surfaces: int = 16,
    repeats: int = 3,
    seed: int = 0,
) -> BenchReport:
    """Wall-clock comparison of the pixel-kernel backends on accumulation.

    Times ``accumulate_into`` over random surfaces for every available
    backend and reports the best of ``repeats`` passes.  Unlike the other
    suites this one measures this machine, not a device profile.
    """
    from .backends import available_backends

    if pixels < 1 or n_surfaces < 1 or repeats < 1:
        raise BenchError("pixels, surfaces and repeats must all be >= 1")
    rng = np.random.default_rng(seed)
    cells = [
        (rng.random(pixels) < 0.5).astype(np.uint8) for _ in range(n_surfaces)
    ]
    rows = []
    for name, module in available_backends().items():
        best = float("inf")
        for _ in range(repeats):
            counts = np.zeros(pixels, dtype=np.uint32)
            t0 = time.perf_counter()
            for surf in cells:
                module.accumulate_into(counts, surf)
            best = min(best, time.perf_counter() - t0)
        rows.append(
            {
                "backend": name,
                "pixels": pixels,
                "surfaces": n_surfaces,
                "best_s": best,
                "mpix_per_s": pixels * n_surfaces / best / 1e6,
            }
        )
    return BenchReport(
        suite="backends",
        rows=rows,
        environment={"pixels": pixels, "surfaces": n_surfaces, "repeats": repeats},
        csv_columns=["backend", "pixels", "surfaces", "best_s", "mpix_per_s"],
    )
