"""HTTP comparison service: recognize uploads with baseline and fine-tuned models.

Both checkpoints are loaded once at startup and shared read-only across
requests; recognition is pure computation, so concurrent requests cannot
interleave state.
"""

from __future__ import annotations

import logging
import socket
import sys
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, File, Query, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__, inference
from .errors import DictMismatchError, UndecodableImageError

log = logging.getLogger("linerec.service")


@dataclass
class ServiceConfig:
    baseline_checkpoint: Path
    finetuned_checkpoint: Path
    dict_path: Path
    host: str = "127.0.0.1"
    port: int = 8000
    max_upload_bytes: int = 5 * 1024 * 1024
    request_timeout: float = 30.0
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    ui_dir: Path | None = None


def _load_models(cfg: ServiceConfig):
    baseline = inference.load_model(cfg.baseline_checkpoint, cfg.dict_path)
    finetuned = inference.load_model(cfg.finetuned_checkpoint, cfg.dict_path)
    if baseline.char_dict.chars != finetuned.char_dict.chars:
        raise DictMismatchError("baseline and finetuned dictionaries differ")
    return baseline, finetuned


def create_app(cfg: ServiceConfig) -> FastAPI:
    """Build the app; loading either checkpoint may raise, aborting startup."""
    baseline, finetuned = _load_models(cfg)
    models = {"baseline": baseline, "finetuned": finetuned}
    started = time.monotonic()

    app = FastAPI(title="linerec comparison service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cfg.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        incident = uuid.uuid4().hex[:12]
        log.error("internal error %s: %r", incident, exc)
        return JSONResponse(status_code=500, content={"error": "internal", "id": incident})

    @app.post("/api/recognize")
    async def recognize(
        request: Request,
        file: UploadFile = File(...),
        model: Literal["baseline", "finetuned", "both"] = Query("both"),
    ):
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > cfg.max_upload_bytes + 8192:
            return JSONResponse(
                status_code=400,
                content={"error": "payload exceeds upload cap"},
            )
        data = await file.read()
        if len(data) > cfg.max_upload_bytes:
            return JSONResponse(
                status_code=400,
                content={"error": "payload exceeds upload cap"},
            )
        try:
            tensor, aspect_broken = inference.preprocess(data)
        except UndecodableImageError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        wanted = ["baseline", "finetuned"] if model == "both" else [model]
        results = {
            name: inference.prediction_as_dict(
                inference.recognize_tensor(tensor, aspect_broken, models[name])
            )
            for name in wanted
        }
        return {
            "input_digest": inference.input_digest(data),
            "results": results,
        }

    @app.get("/api/models")
    async def list_models():
        entries = [
            {
                "name": name,
                "dict_size": m.char_dict.size,
                "parameter_count": m.params.param_count(),
                "file_digest": m.file_digest,
            }
            for name, m in models.items()
        ]
        return {
            "models": entries,
            "identical": baseline.file_digest == finetuned.file_digest,
        }

    @app.get("/api/health")
    async def health():
        return {
            "status": "ok",
            "uptime": time.monotonic() - started,
            "versions": {
                "linerec": __version__,
                "python": sys.version.split()[0],
            },
        }

    if cfg.ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=cfg.ui_dir, html=True), name="ui")
    return app


def run_server(app: FastAPI, cfg: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(
        app,
        host=cfg.host,
        port=cfg.port,
        timeout_keep_alive=int(cfg.request_timeout),
        log_level="info",
    )


def self_test(cfg: ServiceConfig) -> None:
    """Startup validation: load models, build the app, bind/release the port."""
    create_app(cfg)
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((cfg.host, cfg.port))
