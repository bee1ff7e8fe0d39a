// Histogram shaping: bins[k] counts cells flooded by exactly k of the
// selected surfaces. The zero bin (dry everywhere) usually dwarfs the
// rest, so it is hidden by default behind a toggle; counts can be drawn
// on a linear or log scale.

export type HistogramOptions = {
  hideZeroBin: boolean;
  logCounts: boolean;
};

export const DEFAULT_OPTIONS: HistogramOptions = {
  hideZeroBin: true,
  logCounts: false,
};

export type HistogramBar = { overlap: number; count: number; value: number };

export function shapeHistogram(
  bins: number[],
  options: HistogramOptions = DEFAULT_OPTIONS,
): HistogramBar[] {
  const bars: HistogramBar[] = [];
  for (let overlap = 0; overlap < bins.length; overlap++) {
    if (overlap === 0 && options.hideZeroBin) continue;
    const count = bins[overlap];
    const value = options.logCounts ? Math.log10(1 + count) : count;
    bars.push({ overlap, count, value });
  }
  return bars;
}

/** Pixel heights for the shaped bars: the tallest bar fills `height`,
 *  zero-count bars get zero pixels, everything else at least one. */
export function barHeights(bars: HistogramBar[], height: number): number[] {
  const peak = Math.max(0, ...bars.map((b) => b.value));
  if (peak === 0) return bars.map(() => 0);
  return bars.map((b) => {
    if (b.value === 0) return 0;
    return Math.max(1, Math.round((b.value / peak) * height));
  });
}
