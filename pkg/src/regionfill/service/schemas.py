"""Request and response bodies for the inference service."""

from __future__ import annotations

from pydantic import BaseModel


class HealthResponse(BaseModel):
    loaded: bool
    model_id: str | None
    version: str
    uptime_seconds: float


class ModelLoadRequest(BaseModel):
    checkpoint_path: str


class ModelLoadResponse(BaseModel):
    model_id: str
    image_size: int


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: dict | None = None
