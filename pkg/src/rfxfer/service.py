"""HTTP service over a checkpoint library.

Wraps the core package for deployment flows: list pretrained source models,
score their transferability against a local SigMF dataset, pick the best
source, and turn scores into predicted accuracy intervals. The library is a
directory of checkpoint .npz files and predictor .json files; both are
addressed by file stem.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .dataspec import read_sigmf
from .nnkernel import load_checkpoint
from .statfit import load_predictor, predict_accuracy, select_source
from .tmetrics import score_pair

METRICS = ("LEEP", "LOGME")


class ModelInfo(BaseModel):
    id: str
    classes: list[str]
    frame_len: int
    mode: str = ""
    dataset: str = ""


class ScoreRequest(BaseModel):
    model_id: str
    dataset_dir: str
    batch: int = Field(default=256, ge=1)


class ScoreResponse(BaseModel):
    model_id: str
    target_id: str
    leep: float
    logme: float
    n_examples: int


class SelectRequest(BaseModel):
    dataset_dir: str
    metric: str = "LEEP"
    model_ids: list[str] | None = None
    batch: int = Field(default=256, ge=1)


class SelectResponse(BaseModel):
    best: str
    metric: str
    scores: dict[str, float]


class PredictRequest(BaseModel):
    predictor_id: str
    score: float
    confidence: float = 0.95


class PredictResponse(BaseModel):
    estimate: float
    lower: float
    upper: float
    clamped: bool


class RecommendRequest(BaseModel):
    dataset_dir: str
    metric: str = "LEEP"
    predictor_id: str | None = None
    confidence: float = 0.95
    batch: int = Field(default=256, ge=1)


class RecommendResponse(BaseModel):
    best: str
    metric: str
    score: float
    predicted: PredictResponse | None = None


def create_app(library) -> FastAPI:
    lib = Path(library)
    app = FastAPI(title="rfxfer scoring service")

    def model_path(model_id: str) -> Path:
        path = lib / f"{model_id}.npz"
        if not path.is_file():
            raise HTTPException(404, f"unknown model {model_id!r}")
        return path

    def predictor_path(predictor_id: str) -> Path:
        path = lib / f"{predictor_id}.json"
        if not path.is_file():
            raise HTTPException(404, f"unknown predictor {predictor_id!r}")
        return path

    def open_dataset(dataset_dir: str):
        path = Path(dataset_dir)
        if not path.exists():
            raise HTTPException(400, f"dataset not found: {dataset_dir}")
        try:
            return read_sigmf(path)
        except Exception as exc:
            raise HTTPException(400, f"unreadable dataset {dataset_dir}: {exc}")

    def check_metric(metric: str) -> str:
        metric = metric.upper()
        if metric not in METRICS:
            raise HTTPException(400, f"metric must be one of {METRICS}")
        return metric

    def score_one(model_id: str, target, batch: int) -> ScoreResponse:
        ckpt = load_checkpoint(model_path(model_id))
        try:
            leep_score, logme_score = score_pair(ckpt, target, batch=batch, source_id=model_id)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return ScoreResponse(
            model_id=model_id,
            target_id=leep_score.target_id,
            leep=leep_score.value,
            logme=logme_score.value,
            n_examples=leep_score.n_examples,
        )

    def library_ids() -> list:
        return sorted(p.stem for p in lib.glob("*.npz"))

    @app.get("/health")
    def health():
        return {"status": "ok", "library": str(lib), "models": len(library_ids())}

    @app.get("/models", response_model=list[ModelInfo])
    def models():
        infos = []
        for model_id in library_ids():
            ckpt = load_checkpoint(model_path(model_id))
            infos.append(
                ModelInfo(
                    id=model_id,
                    classes=list(ckpt.class_names),
                    frame_len=ckpt.input_shape[1],
                    mode=str(ckpt.provenance.get("mode", "")),
                    dataset=str(ckpt.provenance.get("dataset", "")),
                )
            )
        return infos

    @app.post("/score", response_model=ScoreResponse)
    def score(req: ScoreRequest):
        return score_one(req.model_id, open_dataset(req.dataset_dir), req.batch)

    @app.post("/select", response_model=SelectResponse)
    def select(req: SelectRequest):
        metric = check_metric(req.metric)
        ids = req.model_ids if req.model_ids is not None else library_ids()
        if not ids:
            raise HTTPException(400, "no models to choose from")
        target = open_dataset(req.dataset_dir)
        scored = {mid: score_one(mid, target, req.batch) for mid in ids}
        values = {mid: getattr(r, metric.lower()) for mid, r in scored.items()}
        return SelectResponse(best=select_source(values), metric=metric, scores=values)

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest):
        predictor = load_predictor(predictor_path(req.predictor_id))
        try:
            p = predict_accuracy(predictor, req.score, confidence=req.confidence)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return PredictResponse(
            estimate=p.estimate, lower=p.lower, upper=p.upper, clamped=p.clamped
        )

    @app.post("/recommend", response_model=RecommendResponse)
    def recommend(req: RecommendRequest):
        metric = check_metric(req.metric)
        ids = library_ids()
        if not ids:
            raise HTTPException(400, "model library is empty")
        target = open_dataset(req.dataset_dir)
        scored = {mid: score_one(mid, target, req.batch) for mid in ids}
        values = {mid: getattr(r, metric.lower()) for mid, r in scored.items()}
        best = select_source(values)
        predicted = None
        if req.predictor_id is not None:
            predictor = load_predictor(predictor_path(req.predictor_id))
            try:
                p = predict_accuracy(predictor, values[best], confidence=req.confidence)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
            predicted = PredictResponse(
                estimate=p.estimate, lower=p.lower, upper=p.upper, clamped=p.clamped
            )
        return RecommendResponse(
            best=best, metric=metric, score=values[best], predicted=predicted
        )

    return app
