"""The four buffer-streaming strategies and their pipeline timing.

Strategy naming: ``1b``/``2b`` is the number of buffer/image pairs the
uploader alternates over; ``initial`` uses the coupled write-image path
(hidden client-side duplicate copy, then a bus copy, then the image
transform, all driver-serialized); ``final`` uploads to a linear device
buffer and issues the image transform as a separate, overlappable step.

Structure emitted per strategy (kernels always form a serial accumulation
chain, and a transform never starts before the previous kernel has finished
— transforms and kernels share the device's compute engine):

* ``1b-initial`` — host copy -> buffer copy -> transform -> kernel, with
  each item's host copy waiting for the previous kernel: one image slot and
  a blocking write path leave nothing to overlap.
* ``2b-initial`` — same chain, but item i's host copy only waits for item
  i-2's kernel (the alternate slot), so device work hides behind the
  following item's write; the write path itself still serializes on the
  transfer channel.
* ``1b-final`` — buffer copy -> transform -> kernel with a single pair:
  each copy waits for the previous kernel, so the pipeline is exactly
  serial.
* ``2b-final`` — two pairs: item i's copy waits for item i-2's transform
  (buffer reuse) and nothing else, so copies stream while the compute
  engine drains transforms and kernels.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .device import (
    DeviceProfile,
    kernel_time,
    transfer_time,
    transform_time,
)
from .schedule import (
    OpKind,
    OpNode,
    ScheduleGraph,
    contention_applies,
    node_duration,
    simulate,
)


class Variant(str, Enum):
    ONE_BUFFER_INITIAL = "1b-initial"
    TWO_BUFFER_INITIAL = "2b-initial"
    ONE_BUFFER_FINAL = "1b-final"
    TWO_BUFFER_FINAL = "2b-final"

    @property
    def pairs(self) -> int:
        return 2 if self.value.startswith("2b") else 1

    @property
    def coupled_write(self) -> bool:
        return self.value.endswith("initial")

    @property
    def dma_pairs(self) -> int:
        """Pairs whose transfers genuinely overlap device work.

        Only the decoupled two-pair strategy issues independent DMA while
        the compute engine is busy; the coupled write path serializes its
        copies inside the driver even when alternating two slots, so it is
        priced like a single pair (no overlap factor, no contention).
        """
        return 2 if self is Variant.TWO_BUFFER_FINAL else 1

    @staticmethod
    def parse(text: str) -> "Variant":
        aliases = {
            "1binitial": Variant.ONE_BUFFER_INITIAL,
            "2binitial": Variant.TWO_BUFFER_INITIAL,
            "1bfinal": Variant.ONE_BUFFER_FINAL,
            "2bfinal": Variant.TWO_BUFFER_FINAL,
            "onebufferinitial": Variant.ONE_BUFFER_INITIAL,
            "twobufferinitial": Variant.TWO_BUFFER_INITIAL,
            "onebufferfinal": Variant.ONE_BUFFER_FINAL,
            "twobufferfinal": Variant.TWO_BUFFER_FINAL,
        }
        key = text.strip().lower().replace("_", "").replace("-", "")
        try:
            return aliases[key]
        except KeyError:
            raise StreamError(f"unknown variant {text!r}") from None


VARIANTS = tuple(Variant)


class StreamError(ValueError):
    pass


@dataclass(frozen=True)
class StreamJob:
    """A batch of ``n`` same-sized surfaces to stream and accumulate.

    ``surfaces`` may hold fewer than ``n`` entries; they are cycled in order
    to reach ``n``, which keeps reference accumulation cheap for large runs.
    """

    variant: Variant
    n: int
    width: int
    height: int
    profile: DeviceProfile
    surfaces: Sequence = ()
    bpp: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise StreamError("empty job")
        if self.width < 1 or self.height < 1:
            raise StreamError("image dimensions must be positive")
        if self.bpp != 1:
            raise StreamError("only 1 byte/px surfaces are supported")

    @property
    def payload_bytes(self) -> int:
        return self.width * self.height * self.bpp


def build_schedule(job: StreamJob) -> ScheduleGraph:
    """Emit the operation DAG for the job's streaming strategy.

    Accumulation images are cleared up front (two CLEAR nodes); timing
    starts after the clear, which the simulator realises by pricing CLEAR
    at zero cost.
    """
    variant = job.variant
    dims = (job.width, job.height)
    payload = job.payload_bytes
    nodes: list[OpNode] = [
        OpNode(id="clear[0]", kind=OpKind.CLEAR),
        OpNode(id="clear[1]", kind=OpKind.CLEAR),
    ]
    clear_ids = ("clear[0]", "clear[1]")

    for i in range(1, job.n + 1):
        copy_deps: list[str] = []
        if variant is Variant.ONE_BUFFER_INITIAL:
            if i >= 2:
                copy_deps.append(f"kernel[{i - 1}]")
        elif variant is Variant.TWO_BUFFER_INITIAL:
            if i >= 3:
                copy_deps.append(f"kernel[{i - 2}]")
        elif variant is Variant.ONE_BUFFER_FINAL:
            if i >= 2:
                copy_deps.append(f"kernel[{i - 1}]")
        else:  # TWO_BUFFER_FINAL
            if i >= 3:
                copy_deps.append(f"xform[{i - 2}]")

        if variant.coupled_write:
            nodes.append(
                OpNode(
                    id=f"host[{i}]",
                    kind=OpKind.HOST_COPY,
                    payload_bytes=payload,
                    deps=tuple(copy_deps),
                )
            )
            nodes.append(
                OpNode(
                    id=f"copy[{i}]",
                    kind=OpKind.BUFFER_COPY,
                    payload_bytes=payload,
                    deps=(f"host[{i}]",),
                )
            )
        else:
            nodes.append(
                OpNode(
                    id=f"copy[{i}]",
                    kind=OpKind.BUFFER_COPY,
                    payload_bytes=payload,
                    deps=tuple(copy_deps),
                )
            )

        xform_deps = [f"copy[{i}]"]
        if i >= 2:
            xform_deps.append(f"kernel[{i - 1}]")
        nodes.append(
            OpNode(
                id=f"xform[{i}]",
                kind=OpKind.BUFFER_TO_IMAGE,
                payload_bytes=payload,
                image_dims=dims,
                deps=tuple(xform_deps),
            )
        )

        kernel_deps = [f"xform[{i}]"]
        kernel_deps.extend(clear_ids if i == 1 else (f"kernel[{i - 1}]",))
        nodes.append(
            OpNode(
                id=f"kernel[{i}]",
                kind=OpKind.KERNEL,
                payload_bytes=payload,
                image_dims=dims,
                deps=tuple(kernel_deps),
            )
        )

    return ScheduleGraph(nodes=nodes, pairs=variant.dma_pairs, label=variant.value)


def closed_form_times(
    c: Sequence[int], m: Sequence[int], p: Sequence[int]
) -> tuple[int, int]:
    """Pipelined and serial totals for per-item costs: ``(t_dual, t_single)``.

    ``t_dual`` is the two-pair total: either the compute engine is the
    bottleneck (first copy, then transforms and kernels back to back) or the
    bus is (all copies back to back, then the last item's transform and
    kernel).  ``t_single`` is the one-pair total: every item pays copy +
    transform + kernel back to back.
    """
    if not (len(c) == len(m) == len(p)):
        raise StreamError("cost lists must have equal length")
    if len(c) == 0:
        raise StreamError("cost lists must be non-empty")
    t_single = sum(c) + sum(m) + sum(p)
    t_dual = max(c[0] + sum(m) + sum(p), sum(c) + m[-1] + p[-1])
    return t_dual, t_single


def efficiency(c: Sequence[int], t_total: int) -> float:
    """Fraction of the run spent doing irreducible bus copies."""
    if t_total <= 0:
        raise StreamError("total time must be positive")
    return sum(c) / t_total


@dataclass
class PipelineRunReport:
    variant: str
    n: int
    width: int
    height: int
    total_time_us: int
    per_item_c: list[int]
    per_item_m: list[int]
    per_item_p: list[int]
    transfer_rate_gbps: float
    efficiency: float
    makespan_source: str = "simulated"
    contention_applied: bool = False
    warmup: bool = False

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "n": self.n,
            "width": self.width,
            "height": self.height,
            "total_time_us": self.total_time_us,
            "per_item": {
                "c": self.per_item_c,
                "m": self.per_item_m,
                "p": self.per_item_p,
            },
            "transfer_rate_gbps": self.transfer_rate_gbps,
            "efficiency": self.efficiency,
            "makespan_source": self.makespan_source,
            "contention_applied": self.contention_applied,
            "warmup": self.warmup,
        }

    @staticmethod
    def from_json(doc: dict) -> "PipelineRunReport":
        return PipelineRunReport(
            variant=doc["variant"],
            n=doc["n"],
            width=doc["width"],
            height=doc["height"],
            total_time_us=doc["total_time_us"],
            per_item_c=list(doc["per_item"]["c"]),
            per_item_m=list(doc["per_item"]["m"]),
            per_item_p=list(doc["per_item"]["p"]),
            transfer_rate_gbps=doc["transfer_rate_gbps"],
            efficiency=doc["efficiency"],
            makespan_source=doc["makespan_source"],
            contention_applied=doc["contention_applied"],
            warmup=doc.get("warmup", False),
        )

    def csv_row(self) -> list:
        return [
            self.variant,
            self.n,
            self.width,
            self.height,
            self.total_time_us,
            f"{self.transfer_rate_gbps:.6f}",
            f"{self.efficiency:.6f}",
        ]


CSV_HEADER = ["variant", "n", "width", "height", "total_us", "rate_gbps", "efficiency"]


def reports_to_csv(reports: Sequence[PipelineRunReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerow(report.csv_row())
    return buf.getvalue()


def simulate_stream_timing(
    job: StreamJob, *, makespan_source: str = "simulated"
) -> PipelineRunReport:
    """Timing-only run: build the plan, simulate it, report totals.

    ``makespan_source`` may be ``"closed-form"`` to price the two *final*
    strategies analytically (identical totals, useful for huge ``n``).
    The per-item costs in the report are always the profile's baseline
    (uncontended) prices; overlap and contention adjustments show up only
    in the simulated total, flagged by ``contention_applied``.
    """
    profile = job.profile
    profile.check_image_dims(job.width, job.height)
    payload = job.payload_bytes
    c_i = transfer_time(profile, payload)
    m_i = transform_time(profile, job.width, job.height, job.bpp)
    p_i = kernel_time(profile, "image1", job.width, job.height, job.bpp)
    c = [c_i] * job.n
    m = [m_i] * job.n
    p = [p_i] * job.n

    if makespan_source == "closed-form":
        if job.variant not in (Variant.ONE_BUFFER_FINAL, Variant.TWO_BUFFER_FINAL):
            raise StreamError(
                "closed-form totals are defined for the final strategies only"
            )
        c_eff, m_eff = _effective_costs(job)
        t_dual, t_single = closed_form_times([c_eff] * job.n, [m_eff] * job.n, p)
        total = t_single if job.variant is Variant.ONE_BUFFER_FINAL else t_dual
        total += profile.warmup_us
    else:
        graph = build_schedule(job)
        total = simulate(profile, graph).makespan

    rate_gbps = job.n * payload / total / 1000.0 if total else 0.0
    return PipelineRunReport(
        variant=job.variant.value,
        n=job.n,
        width=job.width,
        height=job.height,
        total_time_us=total,
        per_item_c=c,
        per_item_m=m,
        per_item_p=p,
        transfer_rate_gbps=rate_gbps,
        efficiency=efficiency(c, total),
        makespan_source=makespan_source,
        contention_applied=contention_applies(profile, payload, job.variant.dma_pairs),
        warmup=profile.warmup_us > 0,
    )


def _effective_costs(job: StreamJob) -> tuple[int, int]:
    """Per-item copy/transform prices as the simulator would schedule them."""
    probe_copy = OpNode(
        id="probe-c", kind=OpKind.BUFFER_COPY, payload_bytes=job.payload_bytes
    )
    probe_xform = OpNode(
        id="probe-m",
        kind=OpKind.BUFFER_TO_IMAGE,
        payload_bytes=job.payload_bytes,
        image_dims=(job.width, job.height),
    )
    pairs = job.variant.dma_pairs
    return (
        node_duration(job.profile, probe_copy, pairs=pairs),
        node_duration(job.profile, probe_xform, pairs=pairs),
    )


def run_stream(job: StreamJob, *, makespan_source: str = "simulated"):
    """Stream a job: the reference accumulation plus simulated timing.

    Returns ``(grid, report)``.  The grid is the exact accumulation of all
    ``n`` surfaces (job surfaces cycled in order to reach ``n``) and is
    bit-identical across strategies — the strategies trade time, never
    results.
    """
    from .analytics import AccumulationGrid, accumulate

    if not job.surfaces:
        raise StreamError("run_stream needs at least one surface")
    for idx, surf in enumerate(job.surfaces):
        if (surf.width, surf.height) != (job.width, job.height):
            raise StreamError(
                f"surface at index {idx} is {surf.width}x{surf.height}, "
                f"expected {job.width}x{job.height}"
            )
    if job.n >= (1 << 32):
        raise StreamError("accumulation counts would overflow 32 bits")

    report = simulate_stream_timing(job, makespan_source=makespan_source)

    k = len(job.surfaces)
    cycles, remainder = divmod(job.n, k)
    counts = np.zeros(job.height * job.width, dtype=np.uint64)
    if cycles:
        full = accumulate(list(job.surfaces))
        counts += full.counts.astype(np.uint64).ravel() * cycles
    if remainder:
        part = accumulate(list(job.surfaces[:remainder]))
        counts += part.counts.astype(np.uint64).ravel()

    grid = AccumulationGrid(
        width=job.width,
        height=job.height,
        n_inputs=job.n,
        counts=counts.astype(np.uint32).reshape(job.height, job.width),
    )
    return grid, report


def max_data_per_frame(
    profile: DeviceProfile, width: int, height: int, target_fps: int = 10
) -> int:
    """Bytes the two-pair final pipeline sustains per frame at ``target_fps``.

    Continuous streaming runs the pipeline across frame boundaries, so the
    budget is steady-state throughput times the frame interval: payload
    divided by the per-item step of the pipelined closed form.
    """
    if target_fps < 1:
        raise StreamError("target_fps must be positive")
    profile.check_image_dims(width, height)
    job = StreamJob(
        variant=Variant.TWO_BUFFER_FINAL,
        n=1,
        width=width,
        height=height,
        profile=profile,
    )
    c_eff, m_eff = _effective_costs(job)
    p_i = kernel_time(profile, "image1", width, height)
    step = max(c_eff, m_eff + p_i)
    frame_us = 1_000_000 // target_fps
    if step == 0:
        # Degenerate all-infinite-rate profile: bounded by the bus alone.
        plateau = profile.transfer_curve.value_at(width * height)
        return int(frame_us * plateau * 1000.0)
    payload = width * height
    return int(frame_us * payload // step)
