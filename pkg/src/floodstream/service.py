"""HTTP service: surface ingestion, working-set analytics, stream jobs.

State model: every working-set mutation bumps the store version and wakes a
single recompute worker, which publishes an immutable snapshot (grid digest,
histogram, composite PNG, pipeline report) computed from one coherent
working-set state.  ``GET /snapshot`` long-polls for a snapshot newer than
``min_version`` and answers 204 on timeout, so clients can cheaply follow
changes without a push channel.

Configuration comes from ``create_app`` arguments, falling back to the
environment: ``FLOODSTREAM_DATA`` (data directory), ``FLOODSTREAM_PROFILE``
(default device profile), ``FLOODSTREAM_VARIANT`` (streaming strategy used
for snapshot reports).
"""

from __future__ import annotations

import io
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from PIL import Image

from .analytics import (
    AccumulationGrid,
    AnalyticsError,
    cluster_surfaces,
    composite_map,
    outlier_scores,
    overlap_histogram,
)
from .calibration import CalibrationError, load_profile
from .device import DeviceProfile, ProfileError
from .rasters import RasterError
from .store import DimensionMismatch, StoreError, SurfaceStore, UnknownSurface
from .streaming import StreamError, StreamJob, Variant, run_stream

DEFAULT_POLL_TIMEOUT_S = 25.0


def _placeholder_png() -> bytes:
    buf = io.BytesIO()
    Image.new("RGBA", (1, 1), (0, 0, 0, 0)).save(buf, format="PNG")
    return buf.getvalue()


@dataclass(frozen=True)
class Snapshot:
    """One immutable analytics result; all fields share a working-set version."""

    version: int
    n_inputs: int
    grid_digest: str
    histogram: list[int]
    composite_png: bytes
    report: dict | None

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "n_inputs": self.n_inputs,
            "grid_digest": self.grid_digest,
            "histogram": self.histogram,
            "composite_url": f"/composite.png?version={self.version}",
            "report": self.report,
        }


class AnalyticsEngine:
    """Serialized snapshot recompute off the request path."""

    def __init__(
        self,
        store: SurfaceStore,
        profile: DeviceProfile,
        variant: Variant = Variant.TWO_BUFFER_FINAL,
    ):
        self.store = store
        self.profile = profile
        self.variant = variant
        self._cond = threading.Condition()
        self._dirty = False
        self._stopped = False
        self._snapshot = self._compute()
        self._thread = threading.Thread(
            target=self._worker, name="floodstream-recompute", daemon=True
        )
        self._thread.start()

    # -- lifecycle ---------------------------------------------------------

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify_all()
        self._thread.join(timeout=5)

    def schedule(self) -> None:
        with self._cond:
            self._dirty = True
            self._cond.notify_all()

    def _worker(self) -> None:
        while True:
            with self._cond:
                self._cond.wait_for(lambda: self._dirty or self._stopped)
                if self._stopped:
                    return
                self._dirty = False
            snapshot = self._compute()
            with self._cond:
                # A mutation may have landed mid-compute; its schedule()
                # left _dirty set, so a fresher snapshot follows at once.
                if snapshot.version >= self._snapshot.version:
                    self._snapshot = snapshot
                    self._cond.notify_all()

    # -- queries -----------------------------------------------------------

    def snapshot(self) -> Snapshot:
        with self._cond:
            return self._snapshot

    def wait_snapshot(self, min_version: int, timeout_s: float) -> Snapshot | None:
        with self._cond:
            ok = self._cond.wait_for(
                lambda: self._snapshot.version > min_version or self._stopped,
                timeout=timeout_s,
            )
            if not ok or self._snapshot.version <= min_version:
                return None
            return self._snapshot

    # -- computation -------------------------------------------------------

    def _compute(self) -> Snapshot:
        version, ids = self.store.snapshot_state()
        surfaces = [self.store.surface(sid) for sid in ids]
        dims = self.store.dims()
        report_json: dict | None = None
        if surfaces:
            job = StreamJob(
                variant=self.variant,
                n=len(surfaces),
                width=dims[0],
                height=dims[1],
                profile=self.profile,
                surfaces=surfaces,
            )
            grid, report = run_stream(job)
            report_json = report.to_json()
        elif dims is not None:
            grid = AccumulationGrid.empty(*dims)
        else:
            grid = AccumulationGrid.empty(0, 0)
        histogram = overlap_histogram(grid).bins
        if grid.width and grid.height:
            png = composite_map(grid).png_bytes()
        else:
            png = _placeholder_png()
        return Snapshot(
            version=version,
            n_inputs=grid.n_inputs,
            grid_digest=grid.digest(),
            histogram=histogram,
            composite_png=png,
            report=report_json,
        )


def create_app(
    data_dir: str | None = None,
    profile: str | None = None,
    variant: str | None = None,
    poll_timeout_s: float | None = None,
) -> FastAPI:
    data_dir = data_dir or os.environ.get("FLOODSTREAM_DATA", "./floodstream_data")
    profile_name = profile or os.environ.get(
        "FLOODSTREAM_PROFILE", "synthetic-default"
    )
    variant_name = variant or os.environ.get("FLOODSTREAM_VARIANT", "2b-final")
    timeout_s = (
        poll_timeout_s
        if poll_timeout_s is not None
        else float(os.environ.get("FLOODSTREAM_POLL_TIMEOUT_S", DEFAULT_POLL_TIMEOUT_S))
    )

    store = SurfaceStore(Path(data_dir))
    device_profile = load_profile(profile_name)
    engine = AnalyticsEngine(store, device_profile, Variant.parse(variant_name))
    executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="floodstream-job")
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        engine.stop()
        executor.shutdown(wait=False, cancel_futures=True)

    app = FastAPI(title="floodstream", version="1.0", lifespan=lifespan)
    app.state.store = store
    app.state.engine = engine

    # -- surfaces ----------------------------------------------------------

    @app.post("/surfaces")
    def post_surface(name: str = Form(""), file: UploadFile = File(...)):
        payload = file.file.read()
        label = name or (file.filename or "surface")
        try:
            sid = store.ingest(label, payload)
        except DimensionMismatch as exc:
            raise HTTPException(
                status_code=409,
                detail={
                    "error": str(exc),
                    "expected": {"width": exc.expected[0], "height": exc.expected[1]},
                },
            ) from exc
        except RasterError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"id": sid, "name": label}

    @app.get("/surfaces")
    def get_surfaces():
        return {"surfaces": store.list_surfaces(), "version": store.version}

    @app.delete("/surfaces/{surface_id}")
    def delete_surface(surface_id: str):
        try:
            ws_changed = store.delete(surface_id)
        except UnknownSurface as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        if ws_changed:
            engine.schedule()
        return {"deleted": surface_id, "version": store.version}

    # -- working set and snapshots ------------------------------------------

    @app.put("/workingset")
    def put_working_set(body: dict):
        ids = body.get("ids")
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise HTTPException(status_code=400, detail="body must be {ids: [...]}")
        try:
            version = store.set_working_set(ids)
        except UnknownSurface as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        engine.schedule()
        return {"selected": store.working_set(), "version": version}

    @app.get("/workingset")
    def get_working_set():
        return {"selected": store.working_set(), "version": store.version}

    @app.get("/snapshot")
    def get_snapshot(min_version: int = 0, wait: bool = False):
        if wait:
            snap = engine.wait_snapshot(min_version, timeout_s)
            if snap is None:
                return Response(status_code=204)
        else:
            snap = engine.snapshot()
        return snap.to_json()

    @app.get("/composite.png")
    def get_composite(version: int | None = None):
        snap = engine.snapshot()
        return Response(
            content=snap.composite_png,
            media_type="image/png",
            headers={"x-snapshot-version": str(snap.version)},
        )

    @app.get("/histogram")
    def get_histogram():
        return engine.snapshot().histogram

    # -- working-set analytics ----------------------------------------------

    @app.get("/clusters")
    def get_clusters(tau: float = 0.8):
        surfaces = store.working_surfaces()
        if not surfaces:
            return {"clusters": [], "tau": tau}
        try:
            clusters = cluster_surfaces(surfaces, tau)
        except AnalyticsError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"clusters": clusters, "tau": tau}

    @app.get("/outliers")
    def get_outliers():
        surfaces = store.working_surfaces()
        try:
            scores = outlier_scores(surfaces)
        except AnalyticsError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"scores": scores}

    # -- stream jobs ---------------------------------------------------------

    def _run_job(job_id: str, job: StreamJob) -> None:
        with jobs_lock:
            jobs[job_id]["status"] = "running"
        try:
            grid, report = run_stream(job)
            with jobs_lock:
                jobs[job_id].update(
                    status="done",
                    report=report.to_json(),
                    grid_digest=grid.digest(),
                )
        except Exception as exc:  # surface the failure to the poller
            with jobs_lock:
                jobs[job_id].update(status="error", error=str(exc))

    @app.post("/jobs")
    def post_job(body: dict):
        variant_text = body.get("variant", engine.variant.value)
        n = body.get("n")
        profile_ref = body.get("profile")
        if not isinstance(n, int) or n < 1:
            raise HTTPException(status_code=400, detail="n must be a positive integer")
        surfaces = store.working_surfaces()
        if not surfaces:
            raise HTTPException(status_code=409, detail="working set is empty")
        try:
            job_variant = Variant.parse(str(variant_text))
            job_profile = (
                _resolve_profile(store, profile_ref)
                if profile_ref
                else engine.profile
            )
            dims = store.dims()
            job = StreamJob(
                variant=job_variant,
                n=n,
                width=dims[0],
                height=dims[1],
                profile=job_profile,
                surfaces=surfaces,
            )
        except (StreamError, CalibrationError, ProfileError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        job_id = uuid.uuid4().hex[:12]
        with jobs_lock:
            jobs[job_id] = {"id": job_id, "status": "queued"}
        executor.submit(_run_job, job_id, job)
        return {"id": job_id, "status": "queued"}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None:
                raise HTTPException(status_code=404, detail=f"no such job: {job_id}")
            return dict(job)

    # -- profiles ------------------------------------------------------------

    @app.get("/profiles/{name}")
    def get_profile(name: str):
        try:
            path = store.profile_path(name)
        except StoreError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if path.exists():
            return json.loads(path.read_text())
        try:
            return load_profile(name).to_json()
        except CalibrationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.put("/profiles/{name}")
    def put_profile(name: str, body: dict):
        try:
            path = store.profile_path(name)
            doc = dict(body)
            doc["name"] = name
            DeviceProfile.from_json(doc).save(path)
        except (StoreError, ProfileError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"name": name}

    return app


def _resolve_profile(store: SurfaceStore, ref: str) -> DeviceProfile:
    """Profiles saved through the API take precedence over bundled names."""
    try:
        path = store.profile_path(ref)
        if path.exists():
            return DeviceProfile.load(path)
    except StoreError:
        pass  # not a valid stored name; fall through to bundled/path lookup
    return load_profile(ref)
