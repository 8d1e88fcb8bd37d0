"""HTTP inference service consumed by the browser mask editor.

Endpoints:
  GET  /health   -> {"status", "checkpoint_hash"}
  GET  /version  -> {"version", "checkpoint_hash"}
  POST /inpaint  -> multipart form fields ``image`` (PNG/JPEG) and ``mask``
                    (PNG, white = hole) at matching sizes; responds with a
                    JSON envelope holding the inpainted PNG (base64), the 136
                    landmark values in normalized coordinates, the echoed
                    original size and the measured latency.

A bounded admission semaphore sheds load with 429 when saturated. The loaded
model is never mutated, so concurrent requests match serial results.
"""

from __future__ import annotations

import base64
import io
import logging
import threading
import uuid

import numpy as np
from fastapi import FastAPI, File, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image

import inclg
from inclg.inference import InpaintingModel

logger = logging.getLogger(__name__)


def _decode_image(data: bytes, field_name: str) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
        return img
    except Exception as exc:  # PIL raises various types on malformed uploads
        raise _BadRequest(f"field {field_name!r} is not a decodable image: {exc}") from exc


class _BadRequest(ValueError):
    pass


def create_app(model: InpaintingModel, max_pending: int = 8) -> FastAPI:
    app = FastAPI(title="inclg inpainting service", version=inclg.__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    slots = threading.BoundedSemaphore(max_pending) if max_pending > 0 else None
    app.state.admission = slots

    @app.get("/health")
    def health():
        return {"status": "ok", "checkpoint_hash": model.model_id}

    @app.get("/version")
    def version():
        return {"version": inclg.__version__, "checkpoint_hash": model.model_id}

    @app.post("/inpaint")
    def inpaint(image: UploadFile = File(...), mask: UploadFile = File(...)):
        if slots is not None and not slots.acquire(blocking=False):
            return JSONResponse(status_code=429, content={"error": "service saturated, retry later"})
        try:
            return _handle_inpaint(model, image, mask)
        except _BadRequest as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except Exception:
            correlation_id = uuid.uuid4().hex
            logger.exception("inpaint request failed (correlation id %s)", correlation_id)
            return JSONResponse(
                status_code=500,
                content={"error": "internal error", "correlation_id": correlation_id})
        finally:
            if slots is not None:
                slots.release()

    return app


def _handle_inpaint(model: InpaintingModel, image_upload, mask_upload):
    img = _decode_image(image_upload.file.read(), "image").convert("RGB")
    mask_img = _decode_image(mask_upload.file.read(), "mask").convert("L")
    if img.size != mask_img.size:
        raise _BadRequest(
            f"image size {img.size[0]}x{img.size[1]} does not match "
            f"mask size {mask_img.size[0]}x{mask_img.size[1]}")
    image = np.asarray(img, dtype=np.float32) / 255.0
    mask = (np.asarray(mask_img, dtype=np.float32) / 255.0 >= 0.5).astype(np.float32)

    result = model.infer(image, mask)

    buffer = io.BytesIO()
    Image.fromarray((np.clip(result.image, 0, 1) * 255.0).round().astype(np.uint8)).save(
        buffer, format="PNG")
    return {
        "image_b64": base64.b64encode(buffer.getvalue()).decode("ascii"),
        "landmarks": [float(v) for v in result.landmarks.reshape(-1)],
        "width": img.size[0],
        "height": img.size[1],
        "latency_ms": result.latency_ms,
        "noop": result.noop,
        "warnings": result.warnings,
    }


def run_server(checkpoint_path, host: str = "127.0.0.1", port: int = 8080,
               max_pending: int = 8) -> None:
    import uvicorn

    model = InpaintingModel.from_checkpoint(checkpoint_path)
    logger.info("serving checkpoint %s on %s:%d", model.model_id, host, port)
    uvicorn.run(create_app(model, max_pending=max_pending), host=host, port=port)
