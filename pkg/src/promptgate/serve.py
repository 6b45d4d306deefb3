"""HTTP detection service: a trained classifier behind an embedding provider.

Deployment note: the service has no built-in authentication; run it behind a
gateway. The model and config are immutable after load, so concurrent
requests always score consistently.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .embed import (
    EmbeddingProviderError,
    ProviderConfig,
    RemoteEmbeddingClient,
    embed_texts,
)
from .learn import load_model, predict_proba

logger = logging.getLogger(__name__)

BATCH_LIMIT = 256


class PromptValidationError(ValueError):
    """Request rejected before any provider call (empty prompt, bad batch)."""


class DetectRequest(BaseModel):
    prompt: str


class DetectBatchRequest(BaseModel):
    prompts: list[str]


@dataclass(frozen=True)
class ServiceConfig:
    model_path: str
    provider: ProviderConfig
    listen_address: str = "127.0.0.1:8000"
    threshold: float = 0.5
    max_body_bytes: int = 65536
    request_timeout_s: float = 10.0
    fail_closed: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.max_body_bytes < 1:
            raise ValueError(f"max_body_bytes must be positive, got {self.max_body_bytes}")
        if self.request_timeout_s <= 0:
            raise ValueError(f"request_timeout_s must be positive, got {self.request_timeout_s}")
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit() or not 0 < int(port) < 65536:
            raise ValueError(f"listen_address must be host:port, got {self.listen_address!r}")

    @property
    def host(self) -> str:
        return self.listen_address.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rpartition(":")[2])


class DetectionService:
    """Scores prompts with an immutable (model, provider, threshold) triple."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._model = None
        self._client: Optional[RemoteEmbeddingClient] = None
        self._started = time.monotonic()

    @property
    def is_loaded(self) -> bool:
        return self._model is not None

    @property
    def model_tag(self) -> str:
        return self._model.family if self._model is not None else ""

    def load(self) -> None:
        """Load the model and refuse mismatched embedder/model pairs."""
        model = load_model(self.config.model_path)
        provider = self.config.provider
        if model.provider_tag != provider.tag:
            raise ValueError(
                f"model was trained on provider {model.provider_tag!r} but the service "
                f"is configured for {provider.tag!r}; refusing to serve mismatched scores"
            )
        if model.feature_dim != provider.dim:
            raise ValueError(
                f"model expects {model.feature_dim} features, provider produces {provider.dim}"
            )
        if provider.kind == "remote":
            self._client = RemoteEmbeddingClient(provider)
        self._model = model
        logger.info(
            "loaded %s model from %s (provider %s, threshold %g)",
            model.family, self.config.model_path, provider.tag, self.config.threshold,
        )

    def healthz(self) -> dict:
        return {
            "status": "ok" if self.is_loaded else "loading",
            "model_tag": self.model_tag,
            "provider_tag": self.config.provider.tag,
            "uptime_seconds": round(time.monotonic() - self._started, 3),
        }

    def _score(self, prompts: list[str]) -> np.ndarray:
        matrix = embed_texts(self.config.provider, prompts, self._client)
        # Row-at-a-time scoring keeps a batch answer bit-identical to the
        # same prompts sent singly (BLAS matvec vs gemm round differently).
        return np.concatenate(
            [predict_proba(self._model, matrix[i : i + 1]) for i in range(matrix.shape[0])]
        )

    def _result(self, score: float) -> dict:
        return {
            "score": score,
            "label": "malicious" if score >= self.config.threshold else "benign",
            "model_tag": self.model_tag,
            "provider_tag": self.config.provider.tag,
            "threshold": self.config.threshold,
        }

    def detect(self, prompt: str) -> dict:
        if self._model is None:
            raise RuntimeError("model not loaded")
        if not isinstance(prompt, str) or not prompt.strip():
            raise PromptValidationError("prompt must be non-empty")
        return self._result(float(self._score([prompt])[0]))

    def detect_batch(self, prompts: list[str]) -> list[dict]:
        if self._model is None:
            raise RuntimeError("model not loaded")
        if not prompts:
            raise PromptValidationError("batch must contain at least one prompt")
        if len(prompts) > BATCH_LIMIT:
            raise PromptValidationError(
                f"batch of {len(prompts)} exceeds the limit of {BATCH_LIMIT} prompts"
            )
        for i, p in enumerate(prompts):
            if not isinstance(p, str) or not p.strip():
                raise PromptValidationError(f"prompt at index {i} is empty; whole batch rejected")
        scores = self._score(list(prompts))
        return [self._result(float(s)) for s in scores]

    def degraded_result(self) -> dict:
        """Fail-closed answer when the provider is down: block, say so."""
        result = self._result(1.0)
        result["score"] = None
        result["degraded"] = True
        return result


def create_app(service: DetectionService) -> FastAPI:
    app = FastAPI(title="promptgate", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def limit_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and length.isdigit() and int(length) > service.config.max_body_bytes:
            return JSONResponse(
                status_code=413,
                content={"detail": f"body exceeds {service.config.max_body_bytes} bytes"},
            )
        return await call_next(request)

    def provider_failure(exc: EmbeddingProviderError, batch_size: int = 0):
        if service.config.fail_closed:
            logger.warning("provider failure, failing closed: %s", exc)
            if batch_size:
                content = {"results": [service.degraded_result() for _ in range(batch_size)]}
            else:
                content = service.degraded_result()
            return JSONResponse(status_code=200, content=content)
        return JSONResponse(status_code=502, content={"detail": f"embedding provider failed: {exc}"})

    @app.get("/healthz")
    def healthz():
        return service.healthz()

    @app.post("/v1/detect")
    def detect(body: DetectRequest):
        try:
            return service.detect(body.prompt)
        except PromptValidationError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        except EmbeddingProviderError as exc:
            return provider_failure(exc)

    @app.post("/v1/detect_batch")
    def detect_batch(body: DetectBatchRequest):
        try:
            return {"results": service.detect_batch(body.prompts)}
        except PromptValidationError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        except EmbeddingProviderError as exc:
            return provider_failure(exc, batch_size=len(body.prompts))

    return app


def run_service(config: ServiceConfig) -> None:
    """Load the model, then serve; a missing model aborts before binding."""
    import uvicorn

    service = DetectionService(config)
    service.load()
    app = create_app(service)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
