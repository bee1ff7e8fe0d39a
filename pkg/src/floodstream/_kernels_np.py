"""NumPy implementations of the per-pixel kernels.

This is the fallback backend used when the compiled accelerator is not
available (or is disabled via ``FLOODSTREAM_BACKEND=numpy``).  Both
backends implement the same four primitives over flat arrays; results are
bit-identical.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def accumulate_into(counts: np.ndarray, cells: np.ndarray) -> None:
    """counts[p] += 1 for every pixel p where cells[p] > 0."""
    np.add(counts, cells > 0, out=counts, casting="unsafe")


def overlap_counts(counts: np.ndarray, n_inputs: int) -> np.ndarray:
    """bins[k] = number of pixels covered by exactly k inputs."""
    return np.bincount(counts, minlength=n_inputs + 1).astype(np.int64)


def pair_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """(intersection, union) of the wet masks of two cell arrays."""
    wa = a > 0
    wb = b > 0
    inter = int(np.count_nonzero(wa & wb))
    union = int(np.count_nonzero(wa | wb))
    return inter, union


def composite_fill(counts: np.ndarray, n_inputs: int, out: np.ndarray) -> None:
    """Fill flat RGBA pixels: blue saturation scales with count / n_inputs.

    Zero-count pixels are fully transparent; covered pixels fade from white
    (barely covered) to pure blue (covered by every input).
    """
    sat = counts.astype(np.float64) / float(max(n_inputs, 1))
    grey = np.floor(255.0 * (1.0 - sat) + 0.5).astype(np.uint8)
    covered = counts > 0
    out[:, 0] = np.where(covered, grey, 0)
    out[:, 1] = np.where(covered, grey, 0)
    out[:, 2] = np.where(covered, 255, 0)
    out[:, 3] = np.where(covered, 255, 0)
