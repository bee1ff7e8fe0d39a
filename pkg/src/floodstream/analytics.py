"""Ensemble analytics over stacks of flood surfaces.

All statistics are computed from the wet masks (cell > 0) of equally sized
surfaces: per-cell overlap counts, the overlap histogram, a composite
visualisation, pairwise Jaccard similarity, complete-linkage clustering and
per-surface outlier scores.

The per-pixel inner loops live in the selected kernels backend (Cython when
built, NumPy otherwise); this module orchestrates them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .backends import kernels
from .device import KERNEL_VARIANTS
from .rasters import RasterSurface, rgba_to_png_bytes


class AnalyticsError(ValueError):
    pass


@dataclass
class AccumulationGrid:
    """Integer overlap counts: how many inputs flood each cell."""

    width: int
    height: int
    n_inputs: int
    counts: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.counts.dtype != np.uint32:
            raise AnalyticsError("grid counts must be uint32")
        if self.counts.shape != (self.height, self.width):
            raise AnalyticsError(
                f"counts shape {self.counts.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.counts.size and int(self.counts.max()) > self.n_inputs:
            raise AnalyticsError("a cell count exceeds the number of inputs")

    @staticmethod
    def empty(width: int, height: int) -> "AccumulationGrid":
        return AccumulationGrid(
            width=width,
            height=height,
            n_inputs=0,
            counts=np.zeros((height, width), dtype=np.uint32),
        )

    def digest(self) -> str:
        head = f"{self.width}x{self.height}:{self.n_inputs}:".encode()
        return hashlib.sha256(head + self.counts.tobytes()).hexdigest()


@dataclass
class OverlapHistogram:
    """bins[k] = number of cells flooded by exactly k inputs."""

    bins: list[int]

    @property
    def n_inputs(self) -> int:
        return len(self.bins) - 1


@dataclass
class CompositeImage:
    """RGBA overlay; blue saturation encodes the overlap class."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.pixels.dtype != np.uint8 or self.pixels.shape != (
            self.height,
            self.width,
            4,
        ):
            raise AnalyticsError("composite pixels must be (h, w, 4) uint8")

    def png_bytes(self) -> bytes:
        return rgba_to_png_bytes(self.pixels)


def _check_stack(surfaces: list[RasterSurface]) -> tuple[int, int]:
    if not surfaces:
        raise AnalyticsError("need at least one surface")
    width, height = surfaces[0].width, surfaces[0].height
    for s in surfaces[1:]:
        if (s.width, s.height) != (width, height):
            raise AnalyticsError(
                f"surface {s.id!r} is {s.width}x{s.height}, "
                f"expected {width}x{height}"
            )
    return width, height


def accumulate(
    surfaces: list[RasterSurface], variant: str = "buffer1"
) -> AccumulationGrid:
    """Count, per cell, how many surfaces flood it.

    ``variant`` selects the modeled kernel flavour for costing purposes
    elsewhere; the arithmetic — and therefore the grid — is identical for
    all of them.
    """
    if variant not in KERNEL_VARIANTS:
        raise AnalyticsError(f"unknown kernel variant {variant!r}")
    width, height = _check_stack(surfaces)
    counts = np.zeros(width * height, dtype=np.uint32)
    for s in surfaces:
        kernels.accumulate_into(counts, s.cells.reshape(-1))
    return AccumulationGrid(
        width=width,
        height=height,
        n_inputs=len(surfaces),
        counts=counts.reshape(height, width),
    )


def overlap_histogram(grid: AccumulationGrid) -> OverlapHistogram:
    """Histogram of overlap classes; bins sum to the cell count."""
    bins = kernels.overlap_counts(grid.counts.reshape(-1), grid.n_inputs)
    return OverlapHistogram(bins=[int(b) for b in bins])


def composite_map(
    grid: AccumulationGrid, basemap: CompositeImage | None = None
) -> CompositeImage:
    """Render the overlap grid as a blue-saturation RGBA overlay.

    Covered cells are blue with grey components fading linearly as the
    overlap fraction count/n rises (full agreement = saturated blue);
    uncovered cells are fully transparent.  With a ``basemap``, the overlay
    is composited over it: covered cells replace the basemap pixel,
    uncovered cells show through.
    """
    if basemap is not None and (basemap.width, basemap.height) != (
        grid.width,
        grid.height,
    ):
        raise AnalyticsError(
            f"basemap is {basemap.width}x{basemap.height}, "
            f"expected {grid.width}x{grid.height}"
        )
    out = np.zeros((grid.height * grid.width, 4), dtype=np.uint8)
    kernels.composite_fill(grid.counts.reshape(-1), grid.n_inputs, out)
    pixels = out.reshape(grid.height, grid.width, 4)
    if basemap is not None:
        covered = pixels[:, :, 3] == 255
        merged = basemap.pixels.copy()
        merged[covered] = pixels[covered]
        pixels = merged
    return CompositeImage(width=grid.width, height=grid.height, pixels=pixels)


def jaccard(a: RasterSurface, b: RasterSurface) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise AnalyticsError("jaccard needs equally sized surfaces")
    inter, union = kernels.pair_counts(a.cells.reshape(-1), b.cells.reshape(-1))
    if union == 0:
        return 1.0  # two empty surfaces are identical
    return inter / union


def similarity_matrix(surfaces: list[RasterSurface]) -> np.ndarray:
    _check_stack(surfaces)
    n = len(surfaces)
    sim = np.ones((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            sim[i, j] = sim[j, i] = jaccard(surfaces[i], surfaces[j])
    return sim


def cluster_surfaces(
    surfaces: list[RasterSurface], tau: float = 0.8
) -> list[list[str]]:
    """Complete-linkage agglomeration on Jaccard similarity.

    Two clusters merge while the *minimum* pairwise similarity across them
    is still >= tau, most-similar pair first; equal candidates break ties
    toward the lexically smallest (id_a, id_b) pair.  Returns clusters as
    lists of surface ids, each cluster sorted, clusters ordered by their
    first id.
    """
    if not (0.0 < tau <= 1.0):
        raise AnalyticsError("tau must be in (0, 1]")
    _check_stack(surfaces)
    sim = similarity_matrix(surfaces)
    clusters: list[list[int]] = [[i] for i in range(len(surfaces))]
    ids = [s.id for s in surfaces]

    def linkage(ca: list[int], cb: list[int]) -> float:
        return min(sim[i, j] for i in ca for j in cb)

    while len(clusters) > 1:
        best: tuple[float, str, str, int, int] | None = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                score = linkage(clusters[a], clusters[b])
                if score < tau:
                    continue
                key_a = min(ids[i] for i in clusters[a])
                key_b = min(ids[i] for i in clusters[b])
                lo, hi = sorted((key_a, key_b))
                cand = (-score, lo, hi, a, b)
                if best is None or cand < best:
                    best = cand
        if best is None:
            break
        _, _, _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]

    named = [sorted(ids[i] for i in members) for members in clusters]
    named.sort(key=lambda c: c[0])
    return named


def outlier_scores(surfaces: list[RasterSurface]) -> dict[str, float]:
    """score(s) = 1 - mean Jaccard similarity to every other surface."""
    _check_stack(surfaces)
    n = len(surfaces)
    if n < 2:
        raise AnalyticsError("outlier scores need at least two surfaces")
    sim = similarity_matrix(surfaces)
    scores: dict[str, float] = {}
    for i, s in enumerate(surfaces):
        others = [sim[i, j] for j in range(n) if j != i]
        scores[s.id] = 1.0 - sum(others) / len(others)
    return scores
