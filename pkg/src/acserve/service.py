"""JSON-over-HTTP serving layer, configuration, and persistence wiring.

Endpoints (all JSON):

    POST   /v1/query                     user queries -> response/active/hints/timing
    GET    /v1/metrics                   counters and the TTFT histogram
    POST   /v1/audit/memorization        memorization score for one prediction
    POST   /v1/admin/adapters            register an adapter (path ref or raw body)
    DELETE /v1/admin/adapters/{id}       unregister + purge its store chunks
    PUT    /v1/admin/permissions/{user}  replace a user's grant vector
    GET    /console/...                  static operator console, when configured

Identity is a trusted field (authentication is out of scope); admin
mutations are gated by a static shared-secret header `X-Admin-Token` and
are disabled when no token is configured. Mutations persist to the
configured paths immediately, so a restarted server serves identical
responses. Queries run concurrently; admin mutations serialize against
each other and publish through the registries' locks, so a query sees a
consistent pre- or post-mutation snapshot.
"""

from __future__ import annotations

import hmac
import json
import mimetypes
import os
import tempfile
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .adapters import AdapterRegistry, load_adapter, load_adapter_dir, save_adapter
from .audit import score_prediction
from .embedding import HashEmbedder, RemoteEmbedder, tokenize
from .errors import (
    AcServeError,
    DuplicateId,
    EmptyInput,
    EmptyPrediction,
    InvalidConfig,
    ShapeMismatch,
    UnknownId,
)
from .model import ReferenceModel
from .permissions import PermissionRegistry
from .pipeline import QueryPipeline, RetrievalConfig
from .store import VectorStore

CONFIG_ENV_VAR = "AC_CONFIG"
ADMIN_TOKEN_HEADER = "X-Admin-Token"


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8331"
    model: str | None = None
    store: str | None = None
    adapters_dir: str | None = None
    permissions: str | None = None
    embedder: dict = field(default_factory=lambda: {"builtin": {"dim": 256, "seed": 0}})
    retrieval: dict = field(default_factory=dict)
    metrics_enabled: bool = True
    admin_token: str | None = None
    console_dir: str | None = None

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(**self.retrieval)

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path: str | None = None, overrides: dict | None = None) -> ServiceConfig:
    """Config file (argument, else $AC_CONFIG), with overrides on top."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    data: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ServiceConfig.from_dict(data)


def build_embedder(spec: dict):
    if "builtin" in spec:
        opts = spec["builtin"] or {}
        return HashEmbedder(dim=opts.get("dim", 256), seed=opts.get("seed", 0))
    if "remote" in spec:
        return RemoteEmbedder(spec["remote"]["url"])
    raise InvalidConfig("embedder must specify 'builtin' or 'remote'")


class ServiceState:
    """Registries, pipeline, and persistence wiring behind the endpoints."""

    def __init__(self, config: ServiceConfig):
        if not config.model:
            raise InvalidConfig("config needs a 'model' path")
        self.config = config
        self.model = ReferenceModel.load(config.model)
        self.embedder = build_embedder(config.embedder)
        self.store = (
            VectorStore.load(config.store)
            if config.store and os.path.exists(config.store)
            else VectorStore(dim=getattr(self.embedder, "dim", None) or self.model.input_dim)
        )
        self.adapters = AdapterRegistry(self.model.signature)
        if config.adapters_dir and os.path.isdir(config.adapters_dir):
            for adapter in load_adapter_dir(config.adapters_dir):
                self.adapters.register(adapter)
        self.permissions = (
            PermissionRegistry.load(config.permissions)
            if config.permissions and os.path.exists(config.permissions)
            else PermissionRegistry()
        )
        self.pipeline = QueryPipeline(
            self.embedder,
            self.store,
            self.permissions,
            self.adapters,
            self.model,
            defaults=config.retrieval_config(),
        )
        self._admin_lock = threading.Lock()

    # -- request handlers ------------------------------------------------

    def handle_query(self, body: dict) -> tuple[int, dict]:
        if not isinstance(body, dict):
            return 400, {"error": "body must be a JSON object"}
        user_id = body.get("user_id")
        query = body.get("query")
        if not isinstance(user_id, str) or not isinstance(query, str) or not tokenize(query):
            return 400, {"error": "need non-empty 'user_id' and 'query' strings"}
        defaults = self.config.retrieval_config()
        try:
            config = RetrievalConfig(
                fetch_k=body.get("fetch_k", defaults.fetch_k),
                k=body.get("k", defaults.k),
                threshold=body.get("threshold", defaults.threshold),
                hints_enabled=body.get("hints_enabled", defaults.hints_enabled),
            )
        except InvalidConfig as exc:
            return 422, {"error": str(exc)}
        except TypeError:
            return 400, {"error": "malformed retrieval parameters"}
        try:
            outcome = self.pipeline.query(user_id, query, config)
        except EmptyInput as exc:
            return 400, {"error": str(exc)}
        except AcServeError as exc:
            return 500, {"error": str(exc)}
        return 200, {
            "response": [float(v) for v in outcome.response],
            "trace": outcome.trace,
            "active": [{"id": a, "weight": w} for a, w in outcome.active],
            "hints": [{"id": h, "metadata": meta} for h, meta in outcome.hints],
            "timing": outcome.timing,
        }

    def handle_metrics(self) -> tuple[int, dict]:
        if not self.config.metrics_enabled:
            return 404, {"error": "metrics disabled"}
        return 200, self.pipeline.metrics.as_dict()

    def handle_audit(self, body: dict) -> tuple[int, dict]:
        if not isinstance(body, dict):
            return 400, {"error": "body must be a JSON object"}
        prediction = body.get("prediction")
        if not isinstance(prediction, str) or not tokenize(prediction):
            return 400, {"error": "need a non-empty 'prediction' string"}
        n = body.get("n", 8)
        if not isinstance(n, int) or n < 1:
            return 400, {"error": "'n' must be a positive integer"}
        training_texts: list[str] = []
        if isinstance(body.get("training"), list):
            training_texts.extend(str(t) for t in body["training"])
        for doc_id in body.get("training_ids", []) or []:
            text = self.store.document_text(str(doc_id))
            if text is None:
                return 404, {"error": f"unknown training document {doc_id!r}"}
            training_texts.append(text)
        try:
            report = score_prediction(
                tokenize(prediction), [tokenize(t) for t in training_texts], n
            )
        except EmptyPrediction as exc:
            return 400, {"error": str(exc)}
        return 200, {
            "n": n,
            "absolute": report.absolute,
            "relative": report.relative,
            "interval_count": report.interval_count,
            "intervals": [[iv.start, iv.end] for iv in report.global_intervals],
        }

    def handle_add_adapter(self, body: bytes, content_type: str) -> tuple[int, dict]:
        try:
            if content_type.startswith("application/json"):
                payload = json.loads(body.decode("utf-8"))
                path = payload.get("path")
                if not isinstance(path, str):
                    return 400, {"error": "need {'path': <.acadapter file>}"}
                adapter = load_adapter(path)
            else:
                with tempfile.NamedTemporaryFile(suffix=".acadapter", delete=False) as tmp:
                    tmp.write(body)
                    tmp_path = tmp.name
                try:
                    adapter = load_adapter(tmp_path)
                finally:
                    os.unlink(tmp_path)
        except (OSError, ValueError, KeyError, AcServeError) as exc:
            return 400, {"error": f"unreadable adapter: {exc}"}
        with self._admin_lock:
            try:
                self.adapters.register(adapter)
            except DuplicateId as exc:
                return 409, {"error": str(exc)}
            except ShapeMismatch as exc:
                return 400, {"error": str(exc)}
            if self.config.adapters_dir:
                os.makedirs(self.config.adapters_dir, exist_ok=True)
                save_adapter(adapter, os.path.join(self.config.adapters_dir, f"{adapter.id}.acadapter"))
        return 200, {"id": adapter.id, "layers": len(adapter.deltas)}

    def handle_delete_adapter(self, adapter_id: str) -> tuple[int, dict]:
        with self._admin_lock:
            try:
                self.adapters.unregister(adapter_id)
            except UnknownId as exc:
                return 404, {"error": str(exc)}
            removed_chunks = self.store.remove_by_tag(adapter_id)
            if self.config.adapters_dir:
                path = os.path.join(self.config.adapters_dir, f"{adapter_id}.acadapter")
                if os.path.exists(path):
                    os.unlink(path)
            if self.config.store:
                self.store.save(self.config.store)
        return 200, {"id": adapter_id, "removed_chunks": removed_chunks}

    def handle_put_permissions(self, user_id: str, body: dict) -> tuple[int, dict]:
        if not isinstance(body, dict) or not isinstance(body.get("grants"), list):
            return 400, {"error": "need {'grants': [adapter ids]}"}
        grants = [str(g) for g in body["grants"]]
        with self._admin_lock:
            self.permissions.set_permissions(user_id, grants)
            if self.config.permissions:
                self.permissions.save(self.config.permissions)
        return 200, {"user_id": user_id, "grants": sorted(grants)}


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState = None  # set by Service
    protocol_version = "HTTP/1.1"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, *args):
        pass

    def _body(self) -> bytes:
        # always called before responding: an unread body would desync
        # keep-alive connections (the next request line would be body bytes)
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    @staticmethod
    def _parse_json(raw: bytes):
        if not raw:
            return None
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None

    def _send_json(self, status: int, payload: dict) -> None:
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _admin_authorized(self) -> bool:
        token = self.state.config.admin_token
        supplied = self.headers.get(ADMIN_TOKEN_HEADER, "")
        return bool(token) and hmac.compare_digest(supplied, token)

    def _serve_console(self, path: str) -> None:
        root = self.state.config.console_dir
        if not root:
            self._send_json(404, {"error": "console not configured"})
            return
        rel = path[len("/console") :].lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(root, rel))
        if not full.startswith(os.path.realpath(root) + os.sep) and full != os.path.realpath(root):
            self._send_json(404, {"error": "not found"})
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            data = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    # -- routes -----------------------------------------------------------

    def do_GET(self):
        self._body()
        if self.path == "/v1/metrics":
            self._send_json(*self.state.handle_metrics())
        elif self.path == "/console" or self.path.startswith("/console/"):
            self._serve_console(self.path)
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):
        raw = self._body()
        if self.path == "/v1/query":
            body = self._parse_json(raw)
            if body is None:
                self._send_json(400, {"error": "malformed JSON body"})
            else:
                self._send_json(*self.state.handle_query(body))
        elif self.path == "/v1/audit/memorization":
            body = self._parse_json(raw)
            if body is None:
                self._send_json(400, {"error": "malformed JSON body"})
            else:
                self._send_json(*self.state.handle_audit(body))
        elif self.path == "/v1/admin/adapters":
            if not self._admin_authorized():
                self._send_json(401, {"error": "missing or bad admin token"})
            else:
                content_type = self.headers.get("Content-Type", "")
                self._send_json(*self.state.handle_add_adapter(raw, content_type))
        else:
            self._send_json(404, {"error": "not found"})

    def do_DELETE(self):
        self._body()
        prefix = "/v1/admin/adapters/"
        if self.path.startswith(prefix) and len(self.path) > len(prefix):
            if not self._admin_authorized():
                self._send_json(401, {"error": "missing or bad admin token"})
            else:
                self._send_json(*self.state.handle_delete_adapter(self.path[len(prefix) :]))
        else:
            self._send_json(404, {"error": "not found"})

    def do_PUT(self):
        raw = self._body()
        prefix = "/v1/admin/permissions/"
        if self.path.startswith(prefix) and len(self.path) > len(prefix):
            if not self._admin_authorized():
                self._send_json(401, {"error": "missing or bad admin token"})
            else:
                body = self._parse_json(raw)
                if body is None:
                    self._send_json(400, {"error": "malformed JSON body"})
                else:
                    self._send_json(
                        *self.state.handle_put_permissions(self.path[len(prefix) :], body)
                    )
        else:
            self._send_json(404, {"error": "not found"})


class Service:
    """HTTP server wrapper; `start()` binds (port 0 picks a free port)."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.state = ServiceState(config)
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_port if self._server else self.config.port

    def bind(self) -> None:
        """Bind the listen socket; resolves an ephemeral port request."""
        if self._server is None:
            handler = type("BoundHandler", (_Handler,), {"state": self.state})
            self._server = ThreadingHTTPServer((self.config.host, self.config.port), handler)

    def start(self) -> None:
        self.bind()
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()

    def serve_forever(self) -> None:
        self.bind()
        self._server.serve_forever()

    def stop(self) -> None:
        if self._server:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
