"""Fit a :class:`DeviceProfile` to measured benchmark targets.

The calibration table carries the numbers one records off real hardware:
per-(dims, strategy, N) pipeline totals with their copy efficiencies, the
four kernel-variant average runtimes, and the bus plateau rate.  The solver
inverts the pipeline closed forms row by row:

* a ``1b-final`` row pins the baseline copy, transform and kernel split for
  its image size (the serial pipeline is exactly c + m + p per item);
* a ``2b-final`` row that is *faster* than serial pins the overlapped
  transfer factor for that size (the pipelined steady state is one copy per
  item);
* a ``2b-final`` row that is *slower* than serial (ranking inversion) turns
  on the large-image contention model and pins its transform factor;
* a ``1b-initial`` row pins the hidden client-side copy rate (that chain is
  fully serial: h + c + m + p per item).

``2b-initial`` rows consume no knob — the model predicts them from the
parameters above — so they appear in the residual report as a pure check.
Every target row is re-simulated against the fitted profile and reported
with its residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

try:  # Python 3.9+: importlib.resources.files
    from importlib.resources import files as _resource_files
except ImportError:  # pragma: no cover
    _resource_files = None

from .device import (
    CsvTransformModel,
    ContentionModel,
    DeviceProfile,
    PiecewiseCurve,
    round_half_up,
)
from .streaming import StreamJob, Variant, simulate_stream_timing

KERNEL_STREAM_VARIANT = "image1"


class CalibrationError(ValueError):
    pass


@dataclass
class ResidualRow:
    kind: str
    key: str
    target: float
    modeled: float

    @property
    def residual(self) -> float:
        return self.modeled - self.target

    @property
    def pct_error(self) -> float:
        return 100.0 * (self.modeled - self.target) / self.target if self.target else 0.0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "key": self.key,
            "target": self.target,
            "modeled": self.modeled,
            "residual": self.residual,
            "pct_error": self.pct_error,
        }


@dataclass
class CalibrationResult:
    profile: DeviceProfile
    residuals: list[ResidualRow] = field(default_factory=list)

    def residual_report(self) -> str:
        lines = ["kind,key,target,modeled,residual,pct_error"]
        for row in self.residuals:
            lines.append(
                f"{row.kind},{row.key},{row.target},{row.modeled},"
                f"{row.residual:.6g},{row.pct_error:.4f}"
            )
        return "\n".join(lines) + "\n"


def _row_key(row: Mapping) -> str:
    w, h = row["dims"]
    return f"{w}x{h}/{row['variant']}/n={row['n']}"


def calibrate_profile(targets: Mapping) -> CalibrationResult:
    """Solve the cost-model parameters from a calibration table.

    Raises :class:`CalibrationError` naming the conflicting rows when the
    table cannot be represented (negative implied costs, a dual pipeline
    faster than its own copies, and so on), or when the table is missing
    required sections.
    """
    rows = list(targets.get("rows", ()))
    kernel_us = dict(targets.get("kernel_us", {}))
    if not rows or not kernel_us or "plateau_gbps" not in targets:
        raise CalibrationError("insufficient targets")
    if KERNEL_STREAM_VARIANT not in kernel_us:
        raise CalibrationError(
            f"insufficient targets: kernel_us needs {KERNEL_STREAM_VARIANT!r}"
        )

    kw, kh = targets.get("kernel_dims", (3712, 4416))
    kernel_payload = kw * kh
    kernel_rates = {
        variant: kernel_payload / t_us * 1e6 for variant, t_us in kernel_us.items()
    }
    kernel_rate_bpus = kernel_rates[KERNEL_STREAM_VARIANT] / 1e6

    by_dims: dict[tuple[int, int], dict[str, Mapping]] = {}
    for row in rows:
        dims = tuple(row["dims"])
        by_dims.setdefault(dims, {})[row["variant"]] = row

    conflicts: list[str] = []
    transfer_knots: list[tuple[int, float]] = []
    overlap_knots: list[tuple[int, float]] = []
    transform_points: dict[tuple[int, int], float] = {}
    hidden_candidates: list[tuple[int, float]] = []  # (payload, h_us)
    inversion: list[tuple[int, float]] = []  # (payload, degraded transform factor)
    normal_slot_max = 0
    derived: dict[tuple[int, int], dict[str, int]] = {}

    for dims in sorted(by_dims, key=lambda d: d[0] * d[1]):
        rows_here = by_dims[dims]
        w, h = dims
        payload = w * h
        anchor = rows_here.get(Variant.ONE_BUFFER_FINAL.value)
        if anchor is None:
            conflicts.append(
                f"{w}x{h}: need a 1b-final row to anchor this image size"
            )
            continue
        steady1 = anchor["total_us"] / anchor["n"]
        c_us = round_half_up(anchor["efficiency_pct"] / 100.0 * steady1)
        p_us = round_half_up(payload / kernel_rate_bpus)
        m_us = round_half_up(steady1) - c_us - p_us
        if c_us < 1 or m_us < 1:
            conflicts.append(
                f"{_row_key(anchor)}: implies copy={c_us}us transform={m_us}us "
                "(kernel target leaves no room)"
            )
            continue
        derived[dims] = {"c": c_us, "m": m_us, "p": p_us}
        transfer_knots.append((payload, payload / c_us / 1000.0))
        transform_points[dims] = payload / m_us / 1000.0

        dual = rows_here.get(Variant.TWO_BUFFER_FINAL.value)
        if dual is not None:
            steady2 = round_half_up(dual["total_us"] / dual["n"])
            serial = c_us + m_us + p_us
            if steady2 <= serial:
                if steady2 < c_us:
                    conflicts.append(
                        f"{_row_key(dual)}: dual pipeline faster than its own "
                        f"copies ({steady2}us < {c_us}us)"
                    )
                else:
                    overlap_knots.append((payload, c_us / steady2))
                    normal_slot_max = max(normal_slot_max, 2 * payload)
            else:
                degraded_m = steady2 - p_us
                if degraded_m <= m_us:
                    conflicts.append(
                        f"{_row_key(dual)}: inverted ranking but no transform "
                        "slack to absorb it"
                    )
                else:
                    inversion.append((payload, m_us / degraded_m))

        serial_initial = rows_here.get(Variant.ONE_BUFFER_INITIAL.value)
        if serial_initial is not None:
            steady = round_half_up(serial_initial["total_us"] / serial_initial["n"])
            h_us = steady - (c_us + m_us + p_us)
            if h_us < 1:
                conflicts.append(
                    f"{_row_key(serial_initial)}: coupled write implies "
                    f"non-positive hidden copy time ({h_us}us)"
                )
            else:
                hidden_candidates.append((payload, h_us))

    if conflicts:
        raise CalibrationError(
            "inconsistent targets:\n  " + "\n  ".join(conflicts)
        )
    if not derived:
        raise CalibrationError("insufficient targets")

    low_anchor = targets.get("low_anchor", (64 * 1024, 0.5))
    plateau_at = int(targets.get("plateau_at_bytes", 64 * 1024 * 1024))
    transfer_knots.append((int(low_anchor[0]), float(low_anchor[1])))
    transfer_knots.append((plateau_at, float(targets["plateau_gbps"])))
    transfer_knots.sort()

    hidden_gbps = 6.0
    if hidden_candidates:
        payload, h_us = max(hidden_candidates)
        hidden_gbps = payload / h_us / 1000.0

    contention = None
    if inversion:
        smallest_inverted_slot = min(2 * payload for payload, _ in inversion)
        threshold = (normal_slot_max + smallest_inverted_slot) // 2
        contention = ContentionModel(
            threshold_bytes=threshold,
            transform_factor=inversion[0][1],
        )

    profile = DeviceProfile(
        name=str(targets.get("name", "calibrated")),
        transfer_curve=PiecewiseCurve(tuple(transfer_knots)),
        transform_model=CsvTransformModel(transform_points),
        kernel_rates=kernel_rates,
        hidden_host_copy_gbps=hidden_gbps,
        image_dim_limit=int(targets.get("image_dim_limit", 16384)),
        overlap_transfer=PiecewiseCurve(tuple(sorted(overlap_knots)))
        if overlap_knots
        else None,
        contention=contention,
    )

    residuals = _residuals(profile, targets, kernel_us, kernel_payload)
    return CalibrationResult(profile=profile, residuals=residuals)


def _residuals(
    profile: DeviceProfile,
    targets: Mapping,
    kernel_us: Mapping[str, float],
    kernel_payload: int,
) -> list[ResidualRow]:
    from .device import kernel_time

    residuals = []
    kw, kh = targets.get("kernel_dims", (3712, 4416))
    for variant, t_us in sorted(kernel_us.items()):
        residuals.append(
            ResidualRow(
                kind="kernel_us",
                key=variant,
                target=float(t_us),
                modeled=float(kernel_time(profile, variant, kw, kh)),
            )
        )
    plateau_at = int(targets.get("plateau_at_bytes", 64 * 1024 * 1024))
    residuals.append(
        ResidualRow(
            kind="plateau_gbps",
            key=str(plateau_at),
            target=float(targets["plateau_gbps"]),
            modeled=profile.transfer_curve.value_at(plateau_at),
        )
    )
    for row in targets.get("rows", ()):
        w, h = row["dims"]
        report = simulate_stream_timing(
            StreamJob(
                variant=Variant(row["variant"]),
                n=int(row["n"]),
                width=w,
                height=h,
                profile=profile,
            )
        )
        residuals.append(
            ResidualRow(
                kind="total_us",
                key=_row_key(row),
                target=float(row["total_us"]),
                modeled=float(report.total_time_us),
            )
        )
        if "efficiency_pct" in row:
            residuals.append(
                ResidualRow(
                    kind="efficiency_pct",
                    key=_row_key(row),
                    target=float(row["efficiency_pct"]),
                    modeled=100.0 * report.efficiency,
                )
            )
    return residuals


# -- bundled profiles ------------------------------------------------------

_BUNDLED_DIR = "profiles"


def bundled_profile_path(name: str) -> Path:
    base = _resource_files("floodstream") / _BUNDLED_DIR  # type: ignore[operator]
    return Path(str(base / f"{name}.json"))


def load_profile(name_or_path: str) -> DeviceProfile:
    """Load a profile by bundled name or filesystem path."""
    from .device import synthetic_default_profile

    if name_or_path in ("synthetic-default", "default"):
        return synthetic_default_profile()
    direct = Path(name_or_path)
    if direct.exists():
        return DeviceProfile.load(direct)
    bundled = bundled_profile_path(name_or_path.replace("-", "_"))
    if bundled.exists():
        return DeviceProfile.load(bundled)
    raise CalibrationError(f"no such profile: {name_or_path}")


def load_measured_targets() -> dict:
    path = bundled_profile_path("measured_targets")
    return json.loads(path.read_text())


def measured_reference_profile() -> DeviceProfile:
    """The bundled profile calibrated from measured reference hardware."""
    return DeviceProfile.load(bundled_profile_path("measured_reference"))
