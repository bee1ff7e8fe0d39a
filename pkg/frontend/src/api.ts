// Thin typed client over the service's HTTP API. The fetch implementation
// is injectable so tests can run scripted sessions against a fake server.

export type SurfaceRow = {
  id: string;
  name: string;
  width: number;
  height: number;
  selected: boolean;
};

export type SurfaceList = { surfaces: SurfaceRow[]; version: number };

export type Snapshot = {
  version: number;
  n_inputs: number;
  grid_digest: string;
  histogram: number[];
  composite_url: string;
  report: Record<string, unknown> | null;
};

export type WorkingSet = { selected: string[]; version: number };

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && body.detail) detail = JSON.stringify(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(
    private readonly base = '',
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  listSurfaces(): Promise<SurfaceList> {
    return this.fetchFn(`${this.base}/surfaces`).then((r) =>
      asJson<SurfaceList>(r),
    );
  }

  setWorkingSet(ids: string[]): Promise<WorkingSet> {
    return this.fetchFn(`${this.base}/workingset`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ ids }),
    }).then((r) => asJson<WorkingSet>(r));
  }

  snapshot(): Promise<Snapshot> {
    return this.fetchFn(`${this.base}/snapshot`).then((r) =>
      asJson<Snapshot>(r),
    );
  }

  /** Long-poll: resolves with a newer snapshot, or null when the server
   *  answered 204 (poll window elapsed with nothing new). */
  async waitSnapshot(minVersion: number): Promise<Snapshot | null> {
    const response = await this.fetchFn(
      `${this.base}/snapshot?min_version=${minVersion}&wait=true`,
    );
    if (response.status === 204) return null;
    return asJson<Snapshot>(response);
  }

  compositeUrl(snapshot: Snapshot): string {
    return `${this.base}${snapshot.composite_url}`;
  }
}
