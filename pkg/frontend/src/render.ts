// DOM rendering for the three-panel layout: composite upper-left,
// histogram lower-left, surface list on the right. Pure DOM, no
// framework; every update redraws from the latest consistent
// (snapshot, surfaces) pair plus the optimistic selection.

import { Snapshot, SurfaceList } from './api.js';
import {
  barHeights,
  HistogramOptions,
  shapeHistogram,
} from './histogram.js';

export type ToggleHandler = (id: string) => void;

export class View {
  private compositeImg: HTMLImageElement;
  private histogramCanvas: HTMLCanvasElement;
  private listBox: HTMLUListElement;
  private status: HTMLElement;
  private lastSnapshot: Snapshot | null = null;
  private lastSurfaces: SurfaceList | null = null;
  private selection: ReadonlySet<string> = new Set();

  readonly options: HistogramOptions = { hideZeroBin: true, logCounts: false };

  constructor(
    root: HTMLElement,
    private readonly onToggle: ToggleHandler,
    private readonly base = '',
  ) {
    root.innerHTML = `
      <div class="panels">
        <div class="left">
          <section class="composite">
            <img alt="composite flood extent" />
          </section>
          <section class="histogram">
            <canvas width="480" height="160"></canvas>
            <label><input type="checkbox" class="zero-bin"> show zero-overlap bin</label>
            <label><input type="checkbox" class="log-scale"> log counts</label>
          </section>
          <p class="status"></p>
        </div>
        <ul class="surface-list right"></ul>
      </div>`;
    this.compositeImg = root.querySelector('.composite img')!;
    this.histogramCanvas = root.querySelector('canvas')!;
    this.listBox = root.querySelector('.surface-list')!;
    this.status = root.querySelector('.status')!;
    const zeroBin = root.querySelector<HTMLInputElement>('.zero-bin')!;
    zeroBin.addEventListener('change', () => {
      this.options.hideZeroBin = !zeroBin.checked;
      this.drawHistogram();
    });
    const logScale = root.querySelector<HTMLInputElement>('.log-scale')!;
    logScale.addEventListener('change', () => {
      this.options.logCounts = logScale.checked;
      this.drawHistogram();
    });
  }

  showSelection(selected: ReadonlySet<string>): void {
    this.selection = selected;
    this.drawList();
  }

  showServerState(snapshot: Snapshot, surfaces: SurfaceList): void {
    this.lastSnapshot = snapshot;
    this.lastSurfaces = surfaces;
    this.compositeImg.src = `${this.base}${snapshot.composite_url}`;
    this.status.textContent =
      `snapshot v${snapshot.version} · ${snapshot.n_inputs} surface(s)`;
    this.drawList();
    this.drawHistogram();
  }

  private drawList(): void {
    if (!this.lastSurfaces) return;
    this.listBox.textContent = '';
    for (const row of this.lastSurfaces.surfaces) {
      const item = document.createElement('li');
      const box = document.createElement('input');
      box.type = 'checkbox';
      box.checked = this.selection.has(row.id);
      box.addEventListener('change', () => this.onToggle(row.id));
      const label = document.createElement('label');
      label.append(box, ` ${row.name} (${row.width}×${row.height})`);
      item.appendChild(label);
      this.listBox.appendChild(item);
    }
  }

  private drawHistogram(): void {
    if (!this.lastSnapshot) return;
    const ctx = this.histogramCanvas.getContext('2d');
    if (!ctx) return;
    const { width, height } = this.histogramCanvas;
    ctx.clearRect(0, 0, width, height);
    const bars = shapeHistogram(this.lastSnapshot.histogram, this.options);
    if (bars.length === 0) return;
    const heights = barHeights(bars, height - 18);
    const slot = width / bars.length;
    ctx.fillStyle = '#2563eb';
    ctx.font = '10px sans-serif';
    ctx.textAlign = 'center';
    for (let i = 0; i < bars.length; i++) {
      const h = heights[i];
      ctx.fillRect(i * slot + 2, height - 14 - h, slot - 4, h);
      ctx.fillStyle = '#444';
      ctx.fillText(String(bars[i].overlap), i * slot + slot / 2, height - 3);
      ctx.fillStyle = '#2563eb';
    }
  }
}
