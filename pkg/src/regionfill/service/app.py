"""FastAPI inference service.

Endpoints:
    POST /v1/inpaint   multipart {image, mask} -> PNG
    GET  /v1/health    liveness plus loaded-model info
    POST /v1/model     load a checkpoint, swapping it in atomically

Inpaint responses carry X-Model-Id and X-Processing-Time-Ms headers. Error
responses use a JSON body {code, message, detail}.
"""

from __future__ import annotations

import threading
import time
from io import BytesIO

import numpy as np
from fastapi import FastAPI, File, UploadFile
from fastapi.responses import JSONResponse, Response
from PIL import Image, UnidentifiedImageError

from regionfill import __version__, masks
from regionfill.inference import InpaintEngine
from regionfill.service.schemas import (
    ErrorBody,
    HealthResponse,
    ModelLoadRequest,
    ModelLoadResponse,
)
from regionfill.training import CheckpointError

DEFAULT_MAX_PAYLOAD = 16 * 1024 * 1024
DEFAULT_MAX_CONCURRENCY = 4


class ModelRegistry:
    """Holds the serving engine; swaps happen under a lock so requests in
    flight finish on the model they started with."""

    def __init__(self, engine: InpaintEngine | None = None):
        self._lock = threading.Lock()
        self._engine = engine

    def get(self) -> InpaintEngine | None:
        with self._lock:
            return self._engine

    def swap(self, engine: InpaintEngine) -> None:
        with self._lock:
            self._engine = engine


def _error(status: int, code: str, message: str, detail: dict | None = None) -> JSONResponse:
    body = ErrorBody(code=code, message=message, detail=detail)
    return JSONResponse(status_code=status, content=body.model_dump())


def create_app(
    engine: InpaintEngine | None = None,
    checkpoint: str | None = None,
    max_payload: int = DEFAULT_MAX_PAYLOAD,
    max_concurrency: int = DEFAULT_MAX_CONCURRENCY,
) -> FastAPI:
    if checkpoint is not None:
        engine = InpaintEngine.from_checkpoint(checkpoint)
    registry = ModelRegistry(engine)
    gate = threading.Semaphore(max_concurrency)
    started = time.monotonic()

    app = FastAPI(title="regionfill", version=__version__)
    app.state.registry = registry

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        eng = registry.get()
        return HealthResponse(
            loaded=eng is not None,
            model_id=eng.model_id if eng is not None else None,
            version=__version__,
            uptime_seconds=time.monotonic() - started,
        )

    @app.post("/v1/model", responses={422: {"model": ErrorBody}})
    def load_model(req: ModelLoadRequest):
        try:
            eng = InpaintEngine.from_checkpoint(req.checkpoint_path)
        except (CheckpointError, OSError) as exc:
            return _error(422, "bad_checkpoint", str(exc), {"path": req.checkpoint_path})
        registry.swap(eng)
        return ModelLoadResponse(model_id=eng.model_id, image_size=eng.model_size)

    @app.post("/v1/inpaint")
    def inpaint(image: UploadFile = File(...), mask: UploadFile = File(...)):
        img_bytes = image.file.read()
        mask_bytes = mask.file.read()
        if len(img_bytes) + len(mask_bytes) > max_payload:
            return _error(
                413,
                "payload_too_large",
                f"payload exceeds {max_payload} bytes",
                {"bytes": len(img_bytes) + len(mask_bytes)},
            )
        eng = registry.get()
        if eng is None:
            return _error(503, "model_not_loaded", "no model loaded; POST /v1/model first")
        try:
            with Image.open(BytesIO(img_bytes)) as im:
                img = np.asarray(im.convert("RGB"))
        except (UnidentifiedImageError, OSError) as exc:
            return _error(400, "undecodable_image", f"image part is not a decodable image: {exc}")
        try:
            m = masks.mask_from_bytes(mask_bytes)
        except (UnidentifiedImageError, OSError) as exc:
            return _error(400, "undecodable_mask", f"mask part is not a decodable image: {exc}")
        if m.shape != img.shape[:2]:
            return _error(
                400,
                "dimension_mismatch",
                f"mask is {m.shape[0]}x{m.shape[1]} but image is "
                f"{img.shape[0]}x{img.shape[1]}",
                {"image": list(img.shape[:2]), "mask": list(m.shape)},
            )
        t0 = time.perf_counter()
        with gate:
            out = eng.inpaint_array(img, m)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        buf = BytesIO()
        Image.fromarray(out).save(buf, format="PNG")
        return Response(
            content=buf.getvalue(),
            media_type="image/png",
            headers={
                "X-Model-Id": eng.model_id,
                "X-Processing-Time-Ms": f"{elapsed_ms:.1f}",
            },
        )

    return app
