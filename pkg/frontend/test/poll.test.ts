import { describe, expect, it } from 'vitest';

import { Client } from '../src/api.js';
import { PollLoop, ViewUpdate } from '../src/poll.js';
import { FakeServer, FakeSurface } from './fake_server.js';

const SURFACES: FakeSurface[] = ['a', 'b', 'c'].map((id) => ({
  id,
  name: `gauge-${id}`,
  width: 12,
  height: 8,
}));

function setup() {
  const server = new FakeServer(SURFACES);
  const client = new Client('', server.fetch);
  const updates: ViewUpdate[] = [];
  const poll = new PollLoop(client, (u) => updates.push(u));
  return { server, client, updates, poll };
}

async function until(cond: () => boolean, ms = 1000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > ms) throw new Error('condition not met in time');
    await new Promise((resolve) => setTimeout(resolve, 2));
  }
}

describe('PollLoop', () => {
  it('seeds from a plain snapshot read on the first cycle', async () => {
    const { updates, poll } = setup();

    expect(await poll.cycle()).toBe(true);

    expect(poll.snapshotVersion).toBe(0);
    expect(updates).toHaveLength(1);
    expect(updates[0].snapshot.n_inputs).toBe(0);
    expect(updates[0].snapshot.report).toBeNull();
    expect(updates[0].surfaces.surfaces.map((s) => s.id)).toEqual([
      'a',
      'b',
      'c',
    ]);
  });

  it('adopts the published snapshot after a working-set change', async () => {
    const { client, updates, poll } = setup();
    await poll.cycle();

    const parked = poll.cycle(); // long-poll, nothing new yet
    await client.setWorkingSet(['b']);

    expect(await parked).toBe(true);
    expect(poll.snapshotVersion).toBe(1);
    const last = updates[updates.length - 1];
    expect(last.snapshot.version).toBe(1);
    expect(last.snapshot.n_inputs).toBe(1);
    expect(last.surfaces.version).toBeGreaterThanOrEqual(1);
    expect(
      last.surfaces.surfaces.filter((s) => s.selected).map((s) => s.id),
    ).toEqual(['b']);
  });

  it('returns false on a quiet 204 timeout and keeps its version', async () => {
    const { updates, poll } = setup();
    await poll.cycle();

    expect(await poll.cycle()).toBe(false);
    expect(poll.snapshotVersion).toBe(0);
    expect(updates).toHaveLength(1);
  });

  it('re-reads the listing until it catches up with the snapshot', async () => {
    const { server, client, updates, poll } = setup();
    await poll.cycle();
    await client.setWorkingSet(['a', 'c']);
    server.staleListings = 2;

    const before = server.requestLog.length;
    expect(await poll.cycle()).toBe(true);

    const listed = server.requestLog
      .slice(before)
      .filter((line) => line === 'GET /surfaces');
    expect(listed).toHaveLength(3); // two stale reads, then the fresh one
    const last = updates[updates.length - 1];
    expect(last.surfaces.version).toBeGreaterThanOrEqual(last.snapshot.version);
    expect(
      last.surfaces.surfaces.filter((s) => s.selected).map((s) => s.id),
    ).toEqual(['a', 'c']);
  });

  it('stays quiet while the engine lags, then adopts on publish', async () => {
    const { server, client, updates, poll } = setup();
    server.autoPublish = false;
    await poll.cycle();

    await client.setWorkingSet(['a']); // store moves, snapshot does not
    expect(await poll.cycle()).toBe(false);
    expect(poll.snapshotVersion).toBe(0);

    server.publish();
    expect(await poll.cycle()).toBe(true);
    expect(poll.snapshotVersion).toBe(1);
    expect(updates[updates.length - 1].snapshot.n_inputs).toBe(1);
  });

  it('backs off after an error and recovers on the next cycle', async () => {
    const server = new FakeServer(SURFACES);
    const client = new Client('', server.fetch);
    const updates: ViewUpdate[] = [];
    const delays: number[] = [];
    const poll = new PollLoop(
      client,
      (u) => updates.push(u),
      async (ms) => {
        delays.push(ms);
      },
    );
    server.failSnapshots = 1;

    poll.start();
    await until(() => updates.length === 1);
    await poll.stop();

    expect(delays).toEqual([1000]);
    expect(updates[0].snapshot.version).toBe(0);
  });
});
