// Long-poll loop, independent of user actions. Each cycle waits on
// /snapshot?min_version=N&wait=true, then pairs the fresh snapshot with a
// surface listing at least as new, so the view never mixes an old list
// with a new snapshot. Snapshot versions only ever move forward.

import { Client, Snapshot, SurfaceList } from './api.js';

export type ViewUpdate = { snapshot: Snapshot; surfaces: SurfaceList };
export type UpdateListener = (update: ViewUpdate) => void;

const ERROR_BACKOFF_MS = 1000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class PollLoop {
  private version = -1;
  private stopped = false;
  private running: Promise<void> | null = null;

  constructor(
    private readonly client: Client,
    private readonly onUpdate: UpdateListener,
    private readonly delay: (ms: number) => Promise<void> = sleep,
  ) {}

  get snapshotVersion(): number {
    return this.version;
  }

  start(): void {
    if (this.running) return;
    this.stopped = false;
    this.running = this.loop();
  }

  async stop(): Promise<void> {
    this.stopped = true;
    await this.running;
    this.running = null;
  }

  /** One poll cycle. Returns true when a newer snapshot was adopted,
   *  false on a quiet timeout. Exposed for scripted tests. */
  async cycle(): Promise<boolean> {
    const snapshot =
      this.version < 0
        ? await this.client.snapshot()
        : await this.client.waitSnapshot(this.version);
    if (snapshot === null || snapshot.version < this.version) return false;
    let surfaces = await this.client.listSurfaces();
    while (surfaces.version < snapshot.version) {
      // the listing lagged the snapshot we were just handed; re-read
      surfaces = await this.client.listSurfaces();
    }
    if (snapshot.version > this.version || this.version < 0) {
      this.version = snapshot.version;
      this.onUpdate({ snapshot, surfaces });
      return true;
    }
    return false;
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.cycle();
      } catch {
        if (this.stopped) return;
        await this.delay(ERROR_BACKOFF_MS);
      }
    }
  }
}
