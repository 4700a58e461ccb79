"""HTTP/JSON facade over fitted profilers.

Model artifacts are JSON files in a data directory; sessions live in memory
and evict after an idle timeout.  Requests to one session serialize behind
its lock, different sessions proceed in parallel, and a second optimize on
a session that is already optimizing is rejected with 409 rather than
queued.  All payloads carry "v": 1.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles

from .desirability import Goal
from .engine import Profiler
from .models import artifact_from_json, load_artifact
from .optimizer import GAConfig

DEFAULT_TTL = 3600.0


@dataclass
class _Session:
    profiler: Profiler
    lock: threading.Lock = field(default_factory=threading.Lock)
    optimize_lock: threading.Lock = field(default_factory=threading.Lock)
    created: float = field(default_factory=time.monotonic)
    touched: float = field(default_factory=time.monotonic)


class SessionStore:
    def __init__(self, ttl: float = DEFAULT_TTL):
        self.ttl = ttl
        self._sessions: dict[str, _Session] = {}
        self._guard = threading.Lock()

    def create(self, profiler: Profiler) -> str:
        sid = uuid.uuid4().hex[:12]
        with self._guard:
            self._evict()
            self._sessions[sid] = _Session(profiler)
        return sid

    def get(self, sid: str) -> _Session:
        with self._guard:
            self._evict()
            session = self._sessions.get(sid)
            if session is None:
                raise HTTPException(404, f"unknown session {sid!r}")
            session.touched = time.monotonic()
            return session

    def _evict(self) -> None:
        now = time.monotonic()
        stale = [k for k, s in self._sessions.items() if now - s.touched > self.ttl]
        for k in stale:
            del self._sessions[k]


def create_app(data_dir: str | Path, session_ttl: float = DEFAULT_TTL,
               static_dir: str | Path | None = None) -> FastAPI:
    data_path = Path(data_dir)
    app = FastAPI(title="prediction-profiler")
    store = SessionStore(session_ttl)
    app.state.sessions = store

    def model_ids() -> list[str]:
        if not data_path.is_dir():
            return []
        return sorted(p.stem for p in data_path.glob("*.json"))

    @app.get("/api/models")
    def list_models():
        return {"v": 1, "models": model_ids()}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        model_ref = body.get("model")
        if model_ref is None:
            raise HTTPException(400, "request needs a 'model': artifact id or inline artifact")
        if isinstance(model_ref, str):
            path = data_path / f"{model_ref}.json"
            if not path.is_file():
                raise HTTPException(404, f"unknown model {model_ref!r}")
            predictor, extrap = load_artifact(path)
        elif isinstance(model_ref, dict):
            try:
                predictor, extrap = artifact_from_json(model_ref)
            except Exception as err:
                raise HTTPException(400, f"bad inline model: {err}")
        else:
            raise HTTPException(400, "'model' must be an artifact id or an artifact object")

        mode = body.get("mode", "off")
        goals_doc = body.get("goals") or {}
        try:
            goals = {name: Goal.from_json(doc) for name, doc in goals_doc.items()}
            resolution = int(body.get("resolution", 101))
            profiler = Profiler(predictor, extrap, goals, mode, resolution)
        except (ValueError, KeyError, TypeError) as err:
            raise HTTPException(400, str(err))
        sid = store.create(profiler)
        return {"v": 1, "session": sid, "state": profiler.state_json()}

    @app.get("/api/sessions/{sid}")
    def get_session(sid: str):
        session = store.get(sid)
        with session.lock:
            return {"v": 1, "session": sid, "state": session.profiler.state_json()}

    @app.post("/api/sessions/{sid}/factor")
    def set_factor(sid: str, body: dict = Body(...)):
        session = store.get(sid)
        name, value = body.get("name"), body.get("value")
        if name is None or value is None:
            raise HTTPException(400, "body needs 'name' and 'value'")
        with session.lock:
            profiler = session.profiler
            try:
                result = profiler.set_factor(name, value)
            except KeyError:
                raise HTTPException(400, f"unknown factor {name!r}")
            except ValueError as err:
                raise HTTPException(422, str(err))
            status = (None if result.status is None
                      else result.status.to_json(profiler.extrap.kind))
            return {"v": 1,
                    "stored_value": result.stored_value,
                    "status": status,
                    "warning": result.warning,
                    "clamped": result.clamped,
                    "frozen": result.frozen,
                    "state": profiler.state_json()}

    @app.post("/api/sessions/{sid}/optimize")
    def optimize_session(sid: str, body: dict = Body(default={})):
        session = store.get(sid)
        if not session.optimize_lock.acquire(blocking=False):
            raise HTTPException(409, "an optimize call is already in flight for this session")
        try:
            try:
                config = GAConfig.from_json(body.get("ga") or {})
            except (TypeError, ValueError) as err:
                raise HTTPException(400, str(err))
            with session.lock:
                try:
                    report = session.profiler.optimize_desirability(config)
                except ValueError as err:
                    raise HTTPException(400, str(err))
                return {"v": 1, "report": report.to_json(),
                        "state": session.profiler.state_json()}
        finally:
            session.optimize_lock.release()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
