"""Operation graphs and their deterministic timing simulation.

A :class:`ScheduleGraph` is an ordered DAG of device operations.  Three
hardware channels exist — TRANSFER (bus copies, including the hidden
client-side duplicate), TRANSFORM (linear-to-image reorganisation) and
COMPUTE (kernels) — and run concurrently with each other.  Operations
sharing a channel execute one at a time in enqueue order, like an in-order
command queue.  A node starts when its channel is free *and* every
dependency has finished.

:func:`simulate` prices each node with the profile's cost functions and
returns a :class:`Timeline` mapping node ids to integer-microsecond
start/end times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .device import (
    DeviceProfile,
    host_copy_time,
    kernel_time,
    round_half_up,
    transfer_time,
    transform_time,
)


class Channel(str, Enum):
    TRANSFER = "transfer"
    TRANSFORM = "transform"
    COMPUTE = "compute"


class OpKind(str, Enum):
    HOST_COPY = "host_copy"
    BUFFER_COPY = "buffer_copy"
    BUFFER_TO_IMAGE = "buffer_to_image"
    KERNEL = "kernel"
    CLEAR = "clear"


_DEFAULT_CHANNEL = {
    OpKind.HOST_COPY: Channel.TRANSFER,
    OpKind.BUFFER_COPY: Channel.TRANSFER,
    OpKind.BUFFER_TO_IMAGE: Channel.TRANSFORM,
    OpKind.KERNEL: Channel.COMPUTE,
    OpKind.CLEAR: Channel.COMPUTE,
}


class ScheduleError(ValueError):
    """Malformed graph or a graph the simulator cannot satisfy."""


@dataclass(frozen=True)
class OpNode:
    """One enqueued device operation."""

    id: str
    kind: OpKind
    payload_bytes: int = 0
    image_dims: tuple[int, int] | None = None
    deps: tuple[str, ...] = ()
    kernel_variant: str = "image1"
    channel: Channel = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.channel is None:
            object.__setattr__(self, "channel", _DEFAULT_CHANNEL[self.kind])
        if self.kind in (OpKind.BUFFER_TO_IMAGE, OpKind.KERNEL):
            if self.image_dims is None:
                raise ScheduleError(
                    f"node {self.id!r}: {self.kind.value} nodes carry image_dims"
                )
        if self.payload_bytes < 0:
            raise ScheduleError(f"node {self.id!r}: negative payload")


@dataclass
class ScheduleGraph:
    """Ordered list of nodes; order doubles as per-channel enqueue order."""

    nodes: list[OpNode] = field(default_factory=list)
    # Number of buffer/image pairs whose transfers genuinely overlap device
    # work.  Those plans are subject to a profile's overlap/contention
    # adjustments; plans whose copies are driver-serialized (and generic
    # graphs) keep the default single pair and never see them.
    pairs: int = 1
    label: str = ""

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        for node in self.nodes:
            if node.id in seen:
                raise ScheduleError(f"duplicate node id {node.id!r}")
            for dep in node.deps:
                if dep not in seen:
                    raise ScheduleError(
                        f"node {node.id!r} depends on {dep!r} which does not "
                        "precede it in the graph"
                    )
            seen.add(node.id)

    def by_id(self) -> Mapping[str, OpNode]:
        return {n.id: n for n in self.nodes}


@dataclass
class Timeline:
    """Integer-microsecond start/end per node, plus the overall makespan."""

    starts: dict[str, int]
    ends: dict[str, int]
    makespan: int

    def span(self, node_id: str) -> tuple[int, int]:
        return self.starts[node_id], self.ends[node_id]


def node_duration(
    profile: DeviceProfile, node: OpNode, *, pairs: int = 1
) -> int:
    """Price one node in integer microseconds.

    ``pairs`` identifies two-pair plans, whose buffer copies run against
    concurrent device work and therefore see the profile's overlapped
    transfer factor, and whose transforms can hit the large-image
    contention penalty when the combined image-slot footprint crosses the
    profile threshold.
    """
    if node.kind == OpKind.CLEAR:
        return 0
    if node.kind == OpKind.HOST_COPY:
        return host_copy_time(profile, node.payload_bytes)
    if node.kind == OpKind.BUFFER_COPY:
        base_rate_applies = pairs >= 2
        if base_rate_applies:
            factor = profile.overlap_factor(node.payload_bytes)
            if factor != 1.0:
                rate = profile.transfer_curve.value_at(node.payload_bytes)
                return round_half_up(
                    node.payload_bytes / (rate * factor * 1000.0)
                )
        return transfer_time(profile, node.payload_bytes)
    if node.kind == OpKind.BUFFER_TO_IMAGE:
        w, h = node.image_dims  # type: ignore[misc]
        base = transform_time(profile, w, h)
        if pairs >= 2 and profile.contention is not None:
            slot_bytes = pairs * node.payload_bytes
            if slot_bytes > profile.contention.threshold_bytes:
                rate = profile.transform_model.rate_gbps(w, h)
                rate *= profile.contention.transform_factor
                return round_half_up(node.payload_bytes / (rate * 1000.0))
        return base
    if node.kind == OpKind.KERNEL:
        w, h = node.image_dims  # type: ignore[misc]
        return kernel_time(profile, node.kernel_variant, w, h)
    raise ScheduleError(f"node {node.id!r} has unknown kind {node.kind!r}")


def contention_applies(profile: DeviceProfile, payload_bytes: int, pairs: int) -> bool:
    return (
        pairs >= 2
        and profile.contention is not None
        and pairs * payload_bytes > profile.contention.threshold_bytes
    )


def simulate(profile: DeviceProfile, graph: ScheduleGraph) -> Timeline:
    """Run the deterministic event simulation and return the timeline.

    Node start = max(channel available time, latest dependency end); the
    per-channel available time enforces in-order execution.  Raises
    :class:`ScheduleError` naming the offending node when one cannot be
    priced (for example an image above the device limit).
    """
    graph.validate()
    starts: dict[str, int] = {}
    ends: dict[str, int] = {}
    channel_free: dict[Channel, int] = {c: 0 for c in Channel}
    warmup_pending = profile.warmup_us

    for node in graph.nodes:
        try:
            dur = node_duration(profile, node, pairs=graph.pairs)
        except Exception as exc:
            raise ScheduleError(f"cannot satisfy node {node.id!r}: {exc}") from exc
        start = channel_free[node.channel]
        for dep in node.deps:
            start = max(start, ends[dep])
        if warmup_pending and node.kind != OpKind.CLEAR:
            start += warmup_pending
            warmup_pending = 0
        end = start + dur
        starts[node.id] = start
        ends[node.id] = end
        channel_free[node.channel] = end

    makespan = max(ends.values(), default=0)
    return Timeline(starts=starts, ends=ends, makespan=makespan)


def channel_busy_totals(graph: ScheduleGraph, timeline: Timeline) -> dict[Channel, int]:
    totals = {c: 0 for c in Channel}
    for node in graph.nodes:
        s, e = timeline.span(node.id)
        totals[node.channel] += e - s
    return totals


def verify_timeline(graph: ScheduleGraph, timeline: Timeline) -> None:
    """Assert the legality invariants: causality, exclusivity, order."""
    last_end: dict[Channel, int] = {c: 0 for c in Channel}
    last_start: dict[Channel, int] = {c: -1 for c in Channel}
    ends = timeline.ends
    for node in graph.nodes:
        s, e = timeline.span(node.id)
        if s < 0 or e < s:
            raise ScheduleError(f"node {node.id!r} has an illegal span")
        for dep in node.deps:
            if s < ends[dep]:
                raise ScheduleError(
                    f"node {node.id!r} starts before dependency {dep!r} ends"
                )
        if s < last_end[node.channel] or s < last_start[node.channel]:
            raise ScheduleError(
                f"node {node.id!r} overlaps or reorders its channel"
            )
        last_end[node.channel] = e
        last_start[node.channel] = s
