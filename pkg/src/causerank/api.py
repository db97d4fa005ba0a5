"""HTTP face of the engine, versioned under /v1.

Datasets are uploaded as jsonl record bodies; query statements turn them
into family tables; sessions run ranked searches over a table.  Runs are
asynchronous: POST run returns a run id immediately and clients poll the
run resource.  Retrying POST run with the same token returns the same run.
Every JSON response carries an ``echo`` field with the caller's
X-Idempotency-Key header (or run token), so retries are recognisable.

Error envelope: {"code": ..., "message": ..., "detail": ...} with codes
bad-request (400), not-found (404), conflict (409), invalid-hypothesis
(422) and internal (500).
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .engine import Engine, InvalidOverride, NotScored
from .ingest import MalformedRow, parse_records
from .model import (
    CauseRankError,
    OverlappingMetrics,
    ScoreMethod,
    TimeIndex,
    UnknownFamily,
)
from .query import (
    DuplicateFamilyKey,
    QuerySyntaxError,
    UnknownFunction,
    build_family_table,
    evaluate_query,
    parse_query_file,
    union_results,
)
from .ranking import DEFAULT_TOP_K
from .scoring import ScoringConfig


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


def _bad_request(message: str, detail=None) -> ApiError:
    return ApiError(400, "bad-request", message, detail)


class _RunState:
    """Per-session run bookkeeping: ordered execution, token idempotency."""

    def __init__(self):
        self.lock = threading.Lock()
        self.next_idx = 0
        self.status: dict[int, dict] = {}
        self.tokens: dict[str, int] = {}
        self.last_event: Optional[threading.Event] = None


def build_scoring_config(body: dict) -> ScoringConfig:
    method_text = body.get("method", "l2")
    try:
        method = ScoreMethod.parse(method_text)
    except ValueError as e:
        raise _bad_request(str(e))
    proj_dim = body.get("proj_dim")
    if method is ScoreMethod.L2_PROJ and proj_dim is None:
        tail = method_text.lower().rsplit("p", 1)
        proj_dim = int(tail[1]) if len(tail) == 2 and tail[1].isdigit() else 50
    kwargs = {}
    if body.get("k_folds") is not None:
        kwargs["k_folds"] = int(body["k_folds"])
    if body.get("proj_samples") is not None:
        kwargs["proj_samples"] = int(body["proj_samples"])
    try:
        return ScoringConfig(
            method=method,
            proj_dim=int(proj_dim) if proj_dim is not None else None,
            seed=int(body.get("seed", 0)),
            **kwargs,
        )
    except ValueError as e:
        raise _bad_request(str(e))


def create_app(engine: Engine, run_workers: int = 2) -> FastAPI:
    app = FastAPI(title="causerank", version="1")
    executor = ThreadPoolExecutor(max_workers=max(1, run_workers))
    run_states: dict[str, _RunState] = {}
    registry_lock = threading.Lock()

    def echo_of(request: Request, token: Optional[str] = None) -> Optional[str]:
        return request.headers.get("x-idempotency-key") or token

    def respond(request: Request, payload: dict, status: int = 200, token=None) -> JSONResponse:
        body = dict(payload)
        body["echo"] = echo_of(request, token)
        return JSONResponse(body, status_code=status)

    def run_state(session_id: str) -> _RunState:
        with registry_lock:
            if session_id not in run_states:
                run_states[session_id] = _RunState()
            return run_states[session_id]

    def get_session(session_id: str):
        try:
            return engine.sessions[session_id]
        except KeyError:
            raise ApiError(404, "not-found", f"unknown session {session_id!r}") from None

    async def read_json(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise _bad_request("request body must be JSON") from None
        if not isinstance(body, dict):
            raise _bad_request("request body must be a JSON object")
        return body

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, err: ApiError):
        return JSONResponse(
            {
                "code": err.code,
                "message": err.message,
                "detail": err.detail,
                "echo": echo_of(request),
            },
            status_code=err.status,
        )

    @app.exception_handler(Exception)
    async def handle_internal(request: Request, err: Exception):
        return JSONResponse(
            {"code": "internal", "message": str(err), "detail": None, "echo": echo_of(request)},
            status_code=500,
        )

    # -- datasets ------------------------------------------------------------

    @app.post("/v1/datasets")
    async def upload_dataset(request: Request):
        raw = await request.body()
        try:
            parsed = parse_records(raw, "jsonl")
        except (MalformedRow, UnicodeDecodeError) as e:
            raise _bad_request(f"bad jsonl upload: {e}")
        if not parsed.records:
            raise _bad_request("dataset upload contains no records")
        dataset_id = uuid.uuid4().hex[:12]
        app.state.datasets[dataset_id] = parsed.records
        return respond(
            request,
            {"id": dataset_id, "records": len(parsed.records), "rejected": parsed.rejected},
            status=201,
        )

    @app.post("/v1/datasets/{dataset_id}/queries")
    async def run_queries(dataset_id: str, request: Request):
        if dataset_id not in app.state.datasets:
            raise ApiError(404, "not-found", f"unknown dataset {dataset_id!r}")
        records = app.state.datasets[dataset_id]
        text = (await request.body()).decode("utf-8", errors="replace")
        body_range = request.query_params.get("range")
        try:
            asts = parse_query_file(text)
            if not asts:
                raise _bad_request("no query statements in body")
            index = _resolve_index(asts, records, body_range)
            results = [evaluate_query(ast, records, index) for ast in asts]
            merged = union_results(results)
            table = build_family_table(merged, index, provenance=f"dataset:{dataset_id}")
        except (QuerySyntaxError, UnknownFunction) as e:
            raise _bad_request(str(e))
        except DuplicateFamilyKey as e:
            raise ApiError(409, "conflict", str(e))
        table_id = engine.add_table(table)
        return respond(
            request,
            {
                "table": table_id,
                "families": table.keys(),
                "features": table.total_features(),
                "index": table.index.to_dict(),
            },
            status=201,
        )

    # -- sessions ------------------------------------------------------------

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await read_json(request)
        table_id = body.get("table")
        if not table_id or table_id not in engine.tables:
            raise ApiError(404, "not-found", f"unknown table {table_id!r}")
        if "target" not in body:
            raise _bad_request("missing field: target")
        config = build_scoring_config(body)
        index = _session_index(engine.tables[table_id].index, body)
        try:
            session = engine.create_session(
                table_id=table_id,
                target=body["target"],
                condition=body.get("condition") or [],
                search=body.get("search"),
                config=config,
                index=index,
                k=int(body.get("k", DEFAULT_TOP_K)),
            )
        except (InvalidOverride, OverlappingMetrics) as e:
            raise ApiError(422, "invalid-hypothesis", str(e))
        except UnknownFamily as e:
            raise ApiError(404, "not-found", str(e))
        return respond(request, {"session": session.to_dict()}, status=201)

    @app.get("/v1/sessions/{session_id}")
    async def get_session_state(session_id: str, request: Request):
        session = get_session(session_id)
        state = run_state(session_id)
        with state.lock:
            runs = [
                {"run": idx, **{k: v for k, v in info.items() if k != "event"}}
                for idx, info in sorted(state.status.items())
            ]
        return respond(request, {"session": session.to_dict(), "run_status": runs})

    @app.post("/v1/sessions/{session_id}/run")
    async def start_run(session_id: str, request: Request):
        session = get_session(session_id)
        raw = await request.body()
        token = None
        if raw:
            body = await read_json(request)
            token = body.get("token")
        state = run_state(session_id)
        with state.lock:
            if token and token in state.tokens:
                idx = state.tokens[token]
                info = state.status[idx]
                return respond(
                    request, {"run": idx, "status": info["status"]}, status=200, token=token
                )
            idx = state.next_idx
            state.next_idx += 1
            state.status[idx] = {"status": "pending"}
            if token:
                state.tokens[token] = idx
            prev_event = state.last_event
            done_event = threading.Event()
            state.last_event = done_event

        def task():
            if prev_event is not None:
                prev_event.wait()
            try:
                with engine.session_lock(session_id):
                    engine.run_search(session)
                with state.lock:
                    state.status[idx] = {"status": "done"}
            except Exception as e:
                with state.lock:
                    state.status[idx] = {"status": "failed", "error": str(e)}
            finally:
                done_event.set()

        executor.submit(task)
        return respond(request, {"run": idx, "status": "pending"}, status=202, token=token)

    @app.get("/v1/sessions/{session_id}/runs/{run_index}")
    async def get_run(session_id: str, run_index: int, request: Request):
        session = get_session(session_id)
        state = run_state(session_id)
        with state.lock:
            info = state.status.get(run_index)
        if run_index < len(session.runs):
            record = session.runs[run_index]
            return respond(request, {"status": "done", "report": record.to_dict()})
        if info is None:
            raise ApiError(404, "not-found", f"run {run_index} does not exist")
        return respond(request, dict(info))

    @app.get("/v1/sessions/{session_id}/plots/{family_key}")
    async def get_plot(session_id: str, family_key: str, request: Request):
        session = get_session(session_id)
        try:
            plot = engine.plot_series(session, family_key)
        except NotScored as e:
            raise ApiError(404, "not-found", str(e))
        return respond(
            request,
            {"family": family_key, "plot": plot.to_dict(), "highlight": session.index.highlight},
        )

    @app.post("/v1/sessions/{session_id}/fork")
    async def fork(session_id: str, request: Request):
        session = get_session(session_id)
        raw = await request.body()
        body = await read_json(request) if raw else {}
        overrides = {}
        for key in ("target", "condition", "search", "k"):
            if key in body:
                overrides[key] = body[key]
        if any(k in body for k in ("method", "proj_dim", "seed", "k_folds", "proj_samples")):
            merged = {
                "method": body.get("method", session.config.method_label()),
                "proj_dim": body.get("proj_dim", session.config.proj_dim),
                "seed": body.get("seed", session.config.seed),
                "k_folds": body.get("k_folds"),
                "proj_samples": body.get("proj_samples"),
            }
            overrides["config"] = build_scoring_config(merged)
        if "range" in body or "highlight" in body:
            overrides["index"] = _session_index(session.index, body)
        try:
            child = engine.fork_session(session, overrides)
        except (InvalidOverride, OverlappingMetrics) as e:
            raise ApiError(422, "invalid-hypothesis", str(e))
        except UnknownFamily as e:
            raise ApiError(404, "not-found", str(e))
        return respond(request, {"session": child.to_dict()}, status=201)

    @app.post("/v1/sessions/{session_id}/pseudocause")
    async def pseudocause(session_id: str, request: Request):
        session = get_session(session_id)
        body = await read_json(request)
        kind = body.get("kind")
        if kind not in ("seasonal", "trend", "custom-series"):
            raise _bad_request("kind must be one of seasonal, trend, custom-series")
        try:
            key = engine.add_pseudocause(
                session,
                source=body.get("source", session.target),
                kind=kind,
                params=body.get("params") or {},
                key=body.get("key"),
            )
        except UnknownFamily as e:
            raise ApiError(404, "not-found", str(e))
        except InvalidOverride as e:
            raise ApiError(422, "invalid-hypothesis", str(e))
        except (CauseRankError, ValueError, KeyError) as e:
            raise _bad_request(f"bad pseudocause parameters: {e}")
        return respond(request, {"key": key, "condition": list(session.condition)}, status=201)

    app.state.datasets = {}
    app.state.engine = engine
    return app


def _resolve_index(asts, records, range_param: Optional[str]) -> TimeIndex:
    """Range priority: explicit query param, then RANGE clause, then data extent."""
    if range_param:
        try:
            a, b = range_param.split("..")
            return TimeIndex(int(a), int(b))
        except ValueError:
            raise _bad_request(f"bad range {range_param!r}; expected start..end") from None
    for ast in asts:
        if ast.range_ is not None:
            start, end, step = ast.range_
            return TimeIndex(start, end, step)
    if not records:
        raise _bad_request("cannot infer a time range from an empty dataset")
    ts = [r.ts for r in records]
    lo, hi = min(ts), max(ts)
    if lo == hi:
        raise _bad_request("dataset spans a single timestamp; give an explicit range")
    return TimeIndex(lo, hi)


def _session_index(base: TimeIndex, body: dict) -> TimeIndex:
    start, end = base.start_ts, base.end_ts
    if body.get("range"):
        start, end = int(body["range"][0]), int(body["range"][1])
    highlight = None
    if body.get("highlight"):
        highlight = (int(body["highlight"][0]), int(body["highlight"][1]))
    try:
        return TimeIndex(start_ts=start, end_ts=end, step=base.step, highlight=highlight)
    except ValueError as e:
        raise _bad_request(str(e)) from None
