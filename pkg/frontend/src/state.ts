// Optimistic working-set selection with server reconciliation.
//
// The displayed selection is the user's desired set, updated instantly on
// toggle. At most one PUT /workingset is in flight at a time; further
// toggles while it runs only mutate the desired set, and the sync loop
// issues one more PUT with the latest desired ids once the current call
// returns. The server stays authoritative: its responses (and fresher
// surface listings seen while idle) overwrite the desired set.

import { Client } from './api.js';

export type SelectionListener = (selected: ReadonlySet<string>) => void;

export class SelectionStore {
  private desired = new Set<string>();
  private serverSelected = new Set<string>();
  private serverVersion = 0;
  private inFlight = false;
  private listeners: SelectionListener[] = [];
  private idleWaiters: (() => void)[] = [];
  private syncError: unknown = null;

  constructor(private readonly client: Client) {}

  get selected(): ReadonlySet<string> {
    return this.desired;
  }

  get version(): number {
    return this.serverVersion;
  }

  get syncing(): boolean {
    return this.inFlight;
  }

  /** The last error the sync loop hit, cleared by the next success. */
  get lastError(): unknown {
    return this.syncError;
  }

  onChange(listener: SelectionListener): void {
    this.listeners.push(listener);
  }

  toggle(id: string): void {
    if (this.desired.has(id)) {
      this.desired.delete(id);
    } else {
      this.desired.add(id);
    }
    this.notify();
    void this.sync();
  }

  /** Adopt a server-side selection (from GET /surfaces) unless the user
   *  has unconfirmed local changes — the server can't override a toggle
   *  it hasn't seen yet. Stale versions are ignored outright. */
  applyServerSelection(ids: string[], version: number): void {
    if (version < this.serverVersion) return;
    this.serverVersion = version;
    this.serverSelected = new Set(ids);
    if (!this.inFlight && !this.dirty()) return;
    if (!this.inFlight) {
      // idle but diverged: the change came from elsewhere (another tab,
      // a DELETE); the server wins
      this.desired = new Set(ids);
      this.notify();
    }
  }

  /** Resolves once no mutation is in flight and desired == server. */
  settled(): Promise<void> {
    if (!this.inFlight && !this.dirty()) return Promise.resolve();
    return new Promise((resolve) => this.idleWaiters.push(resolve));
  }

  private dirty(): boolean {
    if (this.desired.size !== this.serverSelected.size) return true;
    for (const id of this.desired) {
      if (!this.serverSelected.has(id)) return true;
    }
    return false;
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.desired);
  }

  private async sync(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      while (this.dirty()) {
        const sending = [...this.desired];
        try {
          const result = await this.client.setWorkingSet(sending);
          this.syncError = null;
          this.serverVersion = Math.max(this.serverVersion, result.version);
          this.serverSelected = new Set(result.selected);
        } catch (err) {
          // Drop the optimistic state rather than retrying forever: the
          // desired set reverts to the last server truth.
          this.syncError = err;
          this.desired = new Set(this.serverSelected);
          this.notify();
          break;
        }
      }
    } finally {
      this.inFlight = false;
      const waiters = this.idleWaiters;
      this.idleWaiters = [];
      for (const resolve of waiters) resolve();
    }
  }
}
