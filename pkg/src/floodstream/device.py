"""Device cost model: transfer curves, transform rates, kernel rates.

A :class:`DeviceProfile` bundles everything needed to price an operation on
a modeled GPU: a piecewise bus-transfer curve, a linear-to-image transform
model (synthetic formula or calibrated from CSV measurements), per-kernel
processing rates, and the rate of the hidden client-side duplicate copy that
the coupled write-image path performs.

All cost functions return integer microseconds, rounded half up.  Rates are
stored as decimal GB/s (1 GB/s == 1000 bytes per microsecond) except for
``kernel_rates`` which are plain bytes per second.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

CURVE_DOMAIN_MIN = 1
CURVE_DOMAIN_MAX = 1 << 30  # 1 GiB

KERNEL_VARIANTS = ("image1", "image2", "buffer1", "buffer2")


class ProfileError(ValueError):
    """Invalid profile data or a query outside a profile's defined domain."""


class UnsupportedImageSize(ProfileError):
    """Planned image exceeds the device's maximum image dimension."""


def round_half_up(x: float) -> int:
    """Round a nonnegative duration to integer microseconds, halves up."""
    return int(math.floor(x + 0.5))


def _bytes_per_us(gbps: float) -> float:
    return gbps * 1000.0


@dataclass(frozen=True)
class PiecewiseCurve:
    """Piecewise-linear map from payload size in bytes to a value.

    Used both for transfer rates (GB/s) and for dimensionless contention
    factors.  Queries clamp to the first/last knot outside the knot range;
    the curve is defined for every size in [1 B, 1 GiB] and raises for
    queries outside that domain.
    """

    knots: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.knots:
            raise ProfileError("curve needs at least one knot")
        sizes = [s for s, _ in self.knots]
        if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
            raise ProfileError("curve knots must be strictly increasing in size")
        if any(v <= 0.0 for _, v in self.knots):
            raise ProfileError("curve values must be strictly positive")

    def value_at(self, nbytes: int) -> float:
        if nbytes < CURVE_DOMAIN_MIN or nbytes > CURVE_DOMAIN_MAX:
            raise ProfileError("size outside curve domain")
        knots = self.knots
        if nbytes <= knots[0][0]:
            return knots[0][1]
        if nbytes >= knots[-1][0]:
            return knots[-1][1]
        for (s0, v0), (s1, v1) in zip(knots, knots[1:]):
            if s0 <= nbytes <= s1:
                frac = (nbytes - s0) / (s1 - s0)
                return v0 + frac * (v1 - v0)
        raise AssertionError("unreachable")


def default_transfer_curve() -> PiecewiseCurve:
    """Synthetic bus curve: 0.5 GB/s at 64 KiB ramping to a 5.07 GB/s plateau
    at 4 MiB, constant beyond."""
    return PiecewiseCurve(((64 * 1024, 0.5), (4 * 1024 * 1024, 5.07)))


@dataclass(frozen=True)
class SyntheticTransformModel:
    """Closed-form linear-to-image transform rate.

    rate(w, h) = r0 * (1 + boost * aligned(w * bpp)) * s(w * h) where
    ``aligned`` is 1 when the row pitch is a multiple of ``alignment_bytes``
    and s(n) = n / (n + n0) penalises small images.  Produces the banded
    rate maps seen on real hardware: aligned widths land on a fast band,
    everything else on a slow one, with tiny images slow everywhere.
    """

    r0_gbps: float = 6.5
    boost: float = 4.0
    alignment_bytes: int = 128
    n0_px: int = 1 << 20

    def rate_gbps(self, width: int, height: int, bpp: int = 1) -> float:
        pitch = width * bpp
        aligned = 1.0 if pitch % self.alignment_bytes == 0 else 0.0
        npx = width * height
        scale = npx / (npx + self.n0_px)
        return self.r0_gbps * (1.0 + self.boost * aligned) * scale


@dataclass(frozen=True)
class CsvTransformModel:
    """Transform rates calibrated from measurements.

    ``points`` maps (width, height) to a measured rate in GB/s.  Lookups at
    a measured point return exactly that rate; other queries interpolate
    bilinearly over the rectangular grid spanned by the measured widths and
    heights, clamping outside it.  Grid cells not covered by a measurement
    borrow the value of the nearest measured point (by |dw| + |dh|).
    """

    points: Mapping[tuple[int, int], float]

    def __post_init__(self) -> None:
        if not self.points:
            raise ProfileError("transform CSV must contain at least one row")
        if any(r <= 0 for r in self.points.values()):
            raise ProfileError("transform rates must be strictly positive")

    def _grid(self) -> tuple[list[int], list[int], dict[tuple[int, int], float]]:
        widths = sorted({w for w, _ in self.points})
        heights = sorted({h for _, h in self.points})
        filled: dict[tuple[int, int], float] = {}
        for w in widths:
            for h in heights:
                if (w, h) in self.points:
                    filled[(w, h)] = self.points[(w, h)]
                else:
                    nearest = min(
                        self.points,
                        key=lambda p: (abs(p[0] - w) + abs(p[1] - h), p),
                    )
                    filled[(w, h)] = self.points[nearest]
        return widths, heights, filled

    @staticmethod
    def from_csv(text: str) -> "CsvTransformModel":
        """Parse calibration CSV with header ``width,height,rate_gbps``."""
        reader = csv.DictReader(io.StringIO(text))
        required = {"width", "height", "rate_gbps"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ProfileError(
                "calibration CSV needs header width,height,rate_gbps"
            )
        points = {}
        for row in reader:
            points[(int(row["width"]), int(row["height"]))] = float(
                row["rate_gbps"]
            )
        return CsvTransformModel(points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["width", "height", "rate_gbps"])
        for (w, h), rate in sorted(self.points.items()):
            writer.writerow([w, h, repr(rate)])
        return buf.getvalue()

    def rate_gbps(self, width: int, height: int, bpp: int = 1) -> float:
        if (width, height) in self.points:
            return self.points[(width, height)]
        widths, heights, filled = self._grid()

        def _bracket(vals: list[int], x: int) -> tuple[int, int, float]:
            if x <= vals[0]:
                return vals[0], vals[0], 0.0
            if x >= vals[-1]:
                return vals[-1], vals[-1], 0.0
            for lo, hi in zip(vals, vals[1:]):
                if lo <= x <= hi:
                    return lo, hi, (x - lo) / (hi - lo)
            raise AssertionError("unreachable")

        w0, w1, fw = _bracket(widths, width)
        h0, h1, fh = _bracket(heights, height)
        top = filled[(w0, h0)] + fw * (filled[(w1, h0)] - filled[(w0, h0)])
        bot = filled[(w0, h1)] + fw * (filled[(w1, h1)] - filled[(w0, h1)])
        return top + fh * (bot - top)


@dataclass(frozen=True)
class ContentionModel:
    """Optional resource-contention hypothesis for the two-pair pipeline.

    When the total image-slot footprint (pairs x payload bytes) exceeds
    ``threshold_bytes``, transform rates for the overlapped two-pair variant
    degrade by ``transform_factor``.  This reproduces the measured ranking
    inversion at very large images and is clearly labeled as a hypothesis
    model in reports.
    """

    threshold_bytes: int
    transform_factor: float

    def __post_init__(self) -> None:
        if not (0.0 < self.transform_factor <= 1.0):
            raise ProfileError("contention transform_factor must be in (0, 1]")
        if self.threshold_bytes <= 0:
            raise ProfileError("contention threshold must be positive")


@dataclass(frozen=True)
class DeviceProfile:
    """Everything needed to price transfers, transforms and kernels."""

    name: str
    transfer_curve: PiecewiseCurve = field(default_factory=default_transfer_curve)
    transform_model: SyntheticTransformModel | CsvTransformModel = field(
        default_factory=SyntheticTransformModel
    )
    kernel_rates: Mapping[str, float] = field(
        default_factory=lambda: {
            "image1": 2.4e10,
            "image2": 2.35e10,
            "buffer1": 1.7e10,
            "buffer2": 2.0e10,
        }
    )
    hidden_host_copy_gbps: float = 6.0
    image_dim_limit: int = 16384
    warmup_us: int = 0
    # Effective transfer-rate multiplier while the two-pair pipeline is
    # genuinely overlapping copies with device work (bus/memory contention).
    overlap_transfer: PiecewiseCurve | None = None
    contention: ContentionModel | None = None

    def __post_init__(self) -> None:
        for variant, rate in self.kernel_rates.items():
            if variant not in KERNEL_VARIANTS:
                raise ProfileError(f"unknown kernel variant {variant!r}")
            if rate <= 0:
                raise ProfileError("kernel rates must be strictly positive")
        if self.hidden_host_copy_gbps <= 0:
            raise ProfileError("hidden host copy rate must be strictly positive")
        if self.image_dim_limit <= 0:
            raise ProfileError("image dimension limit must be positive")
        if self.overlap_transfer is not None:
            if any(v > 1.0 for _, v in self.overlap_transfer.knots):
                raise ProfileError("overlap transfer factors must be <= 1")

    # -- queries ---------------------------------------------------------

    def check_image_dims(self, width: int, height: int) -> None:
        if width > self.image_dim_limit or height > self.image_dim_limit:
            raise UnsupportedImageSize(
                f"unsupported image size {width}x{height}: "
                f"device limit is {self.image_dim_limit}"
            )
        if width <= 0 or height <= 0:
            raise ProfileError("image dimensions must be positive")

    def overlap_factor(self, nbytes: int) -> float:
        if self.overlap_transfer is None:
            return 1.0
        return self.overlap_transfer.value_at(nbytes)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        if isinstance(self.transform_model, SyntheticTransformModel):
            transform = {
                "mode": "synthetic",
                "r0_gbps": self.transform_model.r0_gbps,
                "boost": self.transform_model.boost,
                "alignment_bytes": self.transform_model.alignment_bytes,
                "n0_px": self.transform_model.n0_px,
            }
        else:
            transform = {
                "mode": "csv",
                "points": [
                    [w, h, rate]
                    for (w, h), rate in sorted(self.transform_model.points.items())
                ],
            }
        doc = {
            "name": self.name,
            "transfer_curve": [
                {"bytes": s, "rate_gbps": r} for s, r in self.transfer_curve.knots
            ],
            "transform": transform,
            "kernel_rates": dict(self.kernel_rates),
            "hidden_host_copy_gbps": self.hidden_host_copy_gbps,
            "image_dim_limit": self.image_dim_limit,
            "warmup_us": self.warmup_us,
        }
        if self.overlap_transfer is not None:
            doc["overlap_transfer"] = [
                {"bytes": s, "factor": f} for s, f in self.overlap_transfer.knots
            ]
        if self.contention is not None:
            doc["contention"] = {
                "threshold_bytes": self.contention.threshold_bytes,
                "transform_factor": self.contention.transform_factor,
            }
        return doc

    @staticmethod
    def from_json(doc: Mapping) -> "DeviceProfile":
        try:
            transform_doc = doc["transform"]
            if transform_doc["mode"] == "synthetic":
                transform: SyntheticTransformModel | CsvTransformModel = (
                    SyntheticTransformModel(
                        r0_gbps=transform_doc["r0_gbps"],
                        boost=transform_doc["boost"],
                        alignment_bytes=transform_doc["alignment_bytes"],
                        n0_px=transform_doc["n0_px"],
                    )
                )
            elif transform_doc["mode"] == "csv":
                transform = CsvTransformModel(
                    {(int(w), int(h)): float(r) for w, h, r in transform_doc["points"]}
                )
            else:
                raise ProfileError(
                    f"unknown transform mode {transform_doc['mode']!r}"
                )
            overlap = None
            if "overlap_transfer" in doc:
                overlap = PiecewiseCurve(
                    tuple(
                        (int(k["bytes"]), float(k["factor"]))
                        for k in doc["overlap_transfer"]
                    )
                )
            contention = None
            if doc.get("contention"):
                contention = ContentionModel(
                    threshold_bytes=int(doc["contention"]["threshold_bytes"]),
                    transform_factor=float(doc["contention"]["transform_factor"]),
                )
            return DeviceProfile(
                name=doc["name"],
                transfer_curve=PiecewiseCurve(
                    tuple(
                        (int(k["bytes"]), float(k["rate_gbps"]))
                        for k in doc["transfer_curve"]
                    )
                ),
                transform_model=transform,
                kernel_rates={k: float(v) for k, v in doc["kernel_rates"].items()},
                hidden_host_copy_gbps=float(doc["hidden_host_copy_gbps"]),
                image_dim_limit=int(doc.get("image_dim_limit", 16384)),
                warmup_us=int(doc.get("warmup_us", 0)),
                overlap_transfer=overlap,
                contention=contention,
            )
        except KeyError as exc:
            raise ProfileError(f"profile document missing field: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @staticmethod
    def load(path: str | Path) -> "DeviceProfile":
        return DeviceProfile.from_json(json.loads(Path(path).read_text()))


# -- cost functions ------------------------------------------------------


def transfer_time(profile: DeviceProfile, nbytes: int) -> int:
    """Microseconds for a device-side linear buffer copy of ``nbytes``."""
    if nbytes < 1:
        raise ProfileError("size outside curve domain")
    rate = _bytes_per_us(profile.transfer_curve.value_at(nbytes))
    return round_half_up(nbytes / rate)


def transform_time(
    profile: DeviceProfile, width: int, height: int, bpp: int = 1
) -> int:
    """Microseconds to reorganise a linear buffer into image format."""
    profile.check_image_dims(width, height)
    rate = _bytes_per_us(profile.transform_model.rate_gbps(width, height, bpp))
    return round_half_up(width * height * bpp / rate)


def kernel_time(
    profile: DeviceProfile, variant: str, width: int, height: int, bpp: int = 1
) -> int:
    """Microseconds for one accumulation-kernel pass over an image."""
    profile.check_image_dims(width, height)
    if variant not in profile.kernel_rates:
        raise ProfileError(f"profile has no kernel rate for {variant!r}")
    rate_bytes_per_us = profile.kernel_rates[variant] / 1e6
    return round_half_up(width * height * bpp / rate_bytes_per_us)


def host_copy_time(profile: DeviceProfile, nbytes: int) -> int:
    """Microseconds for the hidden client-side duplicate copy."""
    if nbytes < 1:
        raise ProfileError("size outside curve domain")
    rate = _bytes_per_us(profile.hidden_host_copy_gbps)
    return round_half_up(nbytes / rate)


def synthetic_default_profile() -> DeviceProfile:
    """The built-in synthetic profile used when none is specified."""
    return DeviceProfile(name="synthetic-default")


def flat_curve(gbps: float) -> PiecewiseCurve:
    """Convenience: a transfer curve with a single constant rate."""
    return PiecewiseCurve(((CURVE_DOMAIN_MIN, gbps),))
