"""HTTP review API for the keep/discard user study.

Versioned contract consumed by the review UI:

  GET  /api/v1/pending           -> items not yet labeled
  GET  /api/v1/items             -> all reviewable items with label state
  POST /api/v1/labels            -> submit one keep/discard verdict
  GET  /api/v1/calibration?t=80  -> confusion matrix vs the judge at t
  GET  /api/v1/images/{sample_id}/{role} -> the underlying image file

Annotators never see judge scores; scores enter only the calibration
endpoint. Label writes are serialized per process via the append-only log;
resolution is last-write-wins per annotator, majority across annotators.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .clients import ImageRole
from .store import Manifest
from .verification import HumanLabel, LabelLog, calibrate, resolve_verdicts

API_PREFIX = "/api/v1"

# The user study reviews person-edit triplets; calibration therefore uses
# the person-image judge score.
CALIBRATION_SCORE_KEY = "person"


class LabelRequest(BaseModel):
    sample_id: str
    verdict: str
    annotator_id: str


def create_app(manifest: Manifest, label_log: LabelLog,
               default_threshold: float | None = None) -> FastAPI:
    app = FastAPI(title="garmentlab review API", version="1")
    write_lock = threading.Lock()
    if default_threshold is None:
        default_threshold = manifest.threshold

    def item_payload(record) -> dict:
        return {
            "sample_id": record.sample_id,
            "instruction": record.instruction.forward_text,
            "original_uri": f"{API_PREFIX}/images/{record.sample_id}/person",
            "edited_uri": f"{API_PREFIX}/images/{record.sample_id}/person_edit",
        }

    @app.get(API_PREFIX + "/pending")
    def pending() -> list[dict]:
        labeled = set(resolve_verdicts(label_log.read()))
        return [item_payload(r) for r in manifest.records
                if r.sample_id not in labeled]

    @app.get(API_PREFIX + "/items")
    def items() -> list[dict]:
        verdicts = resolve_verdicts(label_log.read())
        out = []
        for r in manifest.records:
            payload = item_payload(r)
            payload["verdict"] = verdicts.get(r.sample_id)
            out.append(payload)
        return out

    @app.post(API_PREFIX + "/labels")
    def submit_label(req: LabelRequest) -> dict:
        try:
            manifest.get(req.sample_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown sample id {req.sample_id!r}")
        try:
            label = HumanLabel(sample_id=req.sample_id, verdict=req.verdict,
                               annotator_id=req.annotator_id,
                               timestamp=time.time())
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        with write_lock:
            label_log.append(label)
        return {"ok": True, "sample_id": req.sample_id,
                "verdict": req.verdict}

    @app.get(API_PREFIX + "/calibration")
    def calibration(t: float | None = None) -> dict:
        threshold = default_threshold if t is None else t
        labels = label_log.read()
        scores = {r.sample_id: r.scores[CALIBRATION_SCORE_KEY]
                  for r in manifest.records
                  if CALIBRATION_SCORE_KEY in r.scores}
        labels = [lb for lb in labels if lb.sample_id in scores]
        return calibrate(labels, scores, threshold).to_dict()

    @app.get(API_PREFIX + "/images/{sample_id}/{role}")
    def image(sample_id: str, role: str) -> FileResponse:
        try:
            record = manifest.get(sample_id)
            ref = record.images[ImageRole(role)]
        except (KeyError, ValueError):
            raise HTTPException(status_code=404, detail="unknown image")
        path = Path(ref.path)
        if not path.exists():
            raise HTTPException(status_code=404, detail="image file missing")
        return FileResponse(path)

    return app
