"""Service contracts for the four external model roles, with mock backends.

The pipeline treats attribute extraction, garment editing, try-on, and
judging as black-box services. HTTP backends pass image references (shared
storage paths), never inline bytes. Mock backends are pure functions of
their inputs and enable deterministic desk-scale runs: the mock editor
applies an exactly invertible additive pixel transform per edit type, so a
reverse instruction reproduces the original image bit-exactly.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import requests
from PIL import Image

from . import attributes as attr
from . import instructions as instr
from .attributes import AttributeDelta, DeltaKind, GarmentAttributes, parse_attributes
from .instructions import EditInstruction, EditType
from .maskprep import BinaryMask
from .verification import JudgeScore


class ImageRole(Enum):
    GARMENT = "garment"
    PERSON = "person"
    GARMENT_EDIT = "garment_edit"
    PERSON_EDIT = "person_edit"
    LABEL_MAP = "label_map"
    MASK = "mask"


@dataclass(frozen=True)
class ImageRef:
    """Reference to an image on shared storage."""

    id: str
    path: str
    width: int
    height: int
    role: ImageRole

    def to_dict(self) -> dict:
        return {"id": self.id, "path": self.path, "width": self.width,
                "height": self.height, "role": self.role.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ImageRef":
        return cls(id=d["id"], path=d["path"], width=int(d["width"]),
                   height=int(d["height"]), role=ImageRole(d["role"]))


@dataclass(frozen=True)
class ServiceEndpoint:
    """Connection and retry policy for one model service."""

    base_url: str = ""
    backend: str = "mock"  # "mock" | "http"
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: tuple[float, ...] = (0.5, 1.0, 2.0)
    auth_token_env: str | None = None
    max_concurrency: int = 8

    def __post_init__(self):
        if self.backend not in ("mock", "http"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if any(b > a for b, a in zip(self.backoff_s, self.backoff_s[1:])):
            raise ValueError("backoff must be non-decreasing")


class ServiceUnavailable(RuntimeError):
    """The service could not be reached or kept failing after retries."""


class MalformedResponse(ValueError):
    """The service response does not satisfy the contract schema."""


class EditRejected(RuntimeError):
    """The editing service signalled failure for this request."""


class ResolutionMismatch(ValueError):
    """Input image resolutions do not agree."""


class UnparseableScore(ValueError):
    """The judge response lacks a numeric score."""


def load_image(ref: ImageRef | str | Path) -> np.ndarray:
    path = ref.path if isinstance(ref, ImageRef) else ref
    return np.asarray(Image.open(path).convert("RGB")).astype(np.uint8)


def save_image(pixels: np.ndarray, path: str | Path) -> None:
    # Atomic write: identical edits from concurrent workers may target the
    # same output path, and a reader must never observe a torn file.
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    Image.fromarray(pixels.astype(np.uint8), mode="RGB").save(tmp, format="PNG")
    os.replace(tmp, path)


def _with_retries(endpoint: ServiceEndpoint, call: Callable, *args, **kwargs):
    """Run a call under the endpoint retry policy; idempotent by request key."""
    last: Exception | None = None
    for attempt in range(endpoint.max_attempts):
        try:
            return call(*args, **kwargs)
        except (ServiceUnavailable, requests.RequestException) as e:
            last = e
            if attempt + 1 < endpoint.max_attempts:
                backoff = endpoint.backoff_s
                time.sleep(backoff[min(attempt, len(backoff) - 1)] if backoff else 0)
    raise ServiceUnavailable(f"service failed after {endpoint.max_attempts} "
                             f"attempts: {last}") from last


# ---------------------------------------------------------------------------
# Mock transform core
#
# Every mock edit adds a per-edit value (mod 256) over a region derived from
# the instruction. Values are antisymmetric under delta inversion and regions
# depend only on tokens visible in the instruction text, so the mock judge
# can recompute the expected region from the text alone.
# ---------------------------------------------------------------------------

_PATTERN_INDEX = (attr.SOLID,) + attr.PATTERN_BANK
_STRUCTURAL_INDEX = attr.SLEEVE_BANK + attr.NECKLINE_BANK


def _feature_hash(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % 251 + 1


def transform_value(delta: AttributeDelta) -> int:
    """Additive pixel offset (mod 256) for a delta; negates under inverse()."""
    k = delta.kind
    if k is DeltaKind.SET_COLOR:
        v = 7 * (attr.COLOR_BANK.index(delta.new) - attr.COLOR_BANK.index(delta.old))
    elif k is DeltaKind.SET_PATTERN:
        v = 11 * (_PATTERN_INDEX.index(delta.new) - _PATTERN_INDEX.index(delta.old))
    elif k is DeltaKind.SET_MATERIAL:
        v = 13 * (attr.MATERIAL_BANK.index(delta.new) - attr.MATERIAL_BANK.index(delta.old))
    elif k is DeltaKind.SET_STRUCTURAL:
        v = 17 * (_STRUCTURAL_INDEX.index(delta.new) - _STRUCTURAL_INDEX.index(delta.old))
    elif k is DeltaKind.ADD_FEATURE:
        v = _feature_hash(delta.entry.name)
    elif k is DeltaKind.REMOVE_FEATURE:
        v = -_feature_hash(delta.entry.name)
    elif k is DeltaKind.RECOLOR_FEATURE:
        v = 19 * (attr.COLOR_BANK.index(delta.new) - attr.COLOR_BANK.index(delta.old))
    elif k is DeltaKind.REPLACE_FEATURE:
        v = _feature_hash(delta.new) - _feature_hash(delta.old)
    else:
        raise ValueError(f"unknown delta kind {k}")
    return v % 256


def feature_region(name: str, shape: tuple[int, int]) -> tuple[slice, slice]:
    """Deterministic glyph block for a named detail (quarter-frame size)."""
    h, w = shape
    bh, bw = max(h // 4, 1), max(w // 4, 1)
    digest = hashlib.sha256(("region:" + name).encode("utf-8")).digest()
    r0 = int.from_bytes(digest[:4], "big") % (h - bh + 1)
    c0 = int.from_bytes(digest[4:8], "big") % (w - bw + 1)
    return slice(r0, r0 + bh), slice(c0, c0 + bw)


def _delta_region(delta: AttributeDelta, shape: tuple[int, int]
                  ) -> tuple[slice, slice]:
    if delta.kind in (DeltaKind.ADD_FEATURE, DeltaKind.REMOVE_FEATURE):
        return feature_region(delta.entry.name, shape)
    if delta.kind is DeltaKind.RECOLOR_FEATURE:
        return feature_region(delta.name, shape)
    if delta.kind is DeltaKind.REPLACE_FEATURE:
        # Keyed on the pair, not the direction, so the inverse edit hits
        # exactly the same block.
        key = "|".join(sorted((delta.old, delta.new)))
        return feature_region(key, shape)
    return slice(0, shape[0]), slice(0, shape[1])


def apply_mock_edit(pixels: np.ndarray, delta: AttributeDelta) -> np.ndarray:
    out = pixels.astype(np.int64).copy()
    rows, cols = _delta_region(delta, pixels.shape[:2])
    out[rows, cols] = (out[rows, cols] + transform_value(delta)) % 256
    return out.astype(np.uint8)


def _region_from_text(text: str, shape: tuple[int, int]) -> tuple[slice, slice]:
    """Expected edit region recoverable from the instruction text alone."""
    try:
        et, variant, slots = instr.parse_instruction(text)
    except ValueError:
        return slice(0, shape[0]), slice(0, shape[1])
    if et in (EditType.ADD_DETAIL, EditType.REMOVE_ELEMENT):
        return feature_region(slots["feature"], shape)
    if et is EditType.FINE_GRAINED:
        if variant == "replace":
            key = "|".join(sorted((slots["source_feature"],
                                   slots["target_feature"])))
            return feature_region(key, shape)
        return feature_region(slots["feature"], shape)
    return slice(0, shape[0]), slice(0, shape[1])


# ---------------------------------------------------------------------------
# Client contracts
# ---------------------------------------------------------------------------

class AttributeExtractor:
    def extract(self, garment: ImageRef, person: ImageRef) -> GarmentAttributes:
        raise NotImplementedError


class GarmentEditor:
    def edit(self, garment: ImageRef, instruction: EditInstruction) -> ImageRef:
        raise NotImplementedError


class TryOnClient:
    def try_on(self, person: ImageRef, garment: ImageRef,
               mask: BinaryMask) -> ImageRef:
        raise NotImplementedError


class JudgeClient:
    def judge(self, original: ImageRef, edited: ImageRef,
              instruction_text: str) -> JudgeScore:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Mock backends
# ---------------------------------------------------------------------------

class MockAttributeExtractor(AttributeExtractor):
    """Echoes sidecar attribute documents keyed by garment id.

    The sidecar directory holds one ``<garment id>.json`` per garment,
    standing in for the vision model at desk scale.
    """

    def __init__(self, sidecar_dir: str | Path):
        self.sidecar_dir = Path(sidecar_dir)

    def extract(self, garment: ImageRef, person: ImageRef) -> GarmentAttributes:
        path = self.sidecar_dir / f"{garment.id}.json"
        if not path.exists():
            raise ServiceUnavailable(f"no sidecar attributes for {garment.id}")
        try:
            return parse_attributes(path.read_text(encoding="utf-8"))
        except (attr.MalformedDocument, attr.UnknownCategory,
                attr.OutOfBankValue) as e:
            raise MalformedResponse(str(e)) from e


class MockGarmentEditor(GarmentEditor):
    """Applies the invertible mock transform and writes the result to disk."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)

    def edit(self, garment: ImageRef, instruction: EditInstruction) -> ImageRef:
        if not instruction.forward_text:
            raise EditRejected("empty instruction")
        pixels = load_image(garment)
        edited = apply_mock_edit(pixels, instruction.forward_delta)
        tag = hashlib.sha256(
            instruction.forward_text.encode("utf-8")).hexdigest()[:12]
        out_id = f"{garment.id}--{tag}"
        out_path = self.out_dir / f"{out_id}.png"
        save_image(edited, out_path)
        return ImageRef(id=out_id, path=str(out_path), width=garment.width,
                        height=garment.height, role=ImageRole.GARMENT_EDIT)


class MockTryOn(TryOnClient):
    """Rewrites only masked pixels; outside-mask pixels stay bit-identical."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)

    def try_on(self, person: ImageRef, garment: ImageRef,
               mask: BinaryMask) -> ImageRef:
        person_px = load_image(person)
        if (mask.height, mask.width) != person_px.shape[:2]:
            raise ResolutionMismatch(
                f"mask {mask.width}x{mask.height} vs person "
                f"{person_px.shape[1]}x{person_px.shape[0]}")
        garment_px = load_image(garment)
        offset = int(garment_px.sum()) % 255 + 1
        out = person_px.astype(np.int64)
        region = mask.bits.astype(bool)
        out[region] = (out[region] + offset) % 256
        out_id = f"{person.id}--{garment.id}"
        out_path = self.out_dir / f"{out_id}.png"
        save_image(out.astype(np.uint8), out_path)
        return ImageRef(id=out_id, path=str(out_path), width=person.width,
                        height=person.height, role=ImageRole.PERSON_EDIT)


class MockJudge(JudgeClient):
    """Deterministic scoring heuristic, documented and reproducible.

    Garment comparisons: the expected edit region is recovered from the
    instruction text, and

        score = 100 * (0.6 * changed fraction inside the region
                       + 0.4 * (1 - changed fraction outside it)),

    so a perfectly applied mock edit scores 100 and an untouched image 40.
    Person (try-on) comparisons have no text-derivable region (changes are
    localized by the try-on mask), so the heuristic degrades to change
    detection: 100 when any pixel changed, 40 otherwise. Either way an
    ignored edit lands well below the filter threshold.
    ``score_override`` lets tests force arbitrary scores.
    """

    judge_id = "mock-region-judge"

    def __init__(self, score_override: Callable[[ImageRef, ImageRef, str],
                                                float | None] | None = None):
        self.score_override = score_override

    def judge(self, original: ImageRef, edited: ImageRef,
              instruction_text: str) -> JudgeScore:
        if self.score_override is not None:
            forced = self.score_override(original, edited, instruction_text)
            if forced is not None:
                return JudgeScore(s=float(forced), rationale="forced score",
                                  judge_id=self.judge_id)
        a = load_image(original)
        b = load_image(edited)
        if a.shape != b.shape:
            raise ResolutionMismatch("original/edited resolutions differ")
        changed = np.any(a != b, axis=-1)
        if edited.role in (ImageRole.PERSON, ImageRole.PERSON_EDIT):
            moved = bool(changed.any())
            score = 100.0 if moved else 40.0
            rationale = ("try-on output differs from source person" if moved
                         else "try-on output identical to source person")
            return JudgeScore(s=score, rationale=rationale,
                              judge_id=self.judge_id)
        region = np.zeros(a.shape[:2], dtype=bool)
        rows, cols = _region_from_text(instruction_text, a.shape[:2])
        region[rows, cols] = True
        inside = float(changed[region].mean()) if region.any() else 0.0
        outside = float(changed[~region].mean()) if (~region).any() else 0.0
        score = 100.0 * (0.6 * inside + 0.4 * (1.0 - outside))
        rationale = (f"inside-region change {inside:.3f}, "
                     f"outside-region change {outside:.3f}")
        return JudgeScore(s=score, rationale=rationale, judge_id=self.judge_id)


# ---------------------------------------------------------------------------
# HTTP backends (image payloads by reference)
# ---------------------------------------------------------------------------

class _HttpBase:
    def __init__(self, endpoint: ServiceEndpoint,
                 session: requests.Session | None = None):
        self.endpoint = endpoint
        self.session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(endpoint.max_concurrency)

    def _post(self, route: str, payload: dict) -> dict:
        def attempt() -> dict:
            headers = {}
            if self.endpoint.auth_token_env:
                token = os.environ.get(self.endpoint.auth_token_env, "")
                headers["Authorization"] = f"Bearer {token}"
            with self._gate:
                resp = self.session.post(
                    self.endpoint.base_url.rstrip("/") + route,
                    json=payload, headers=headers,
                    timeout=self.endpoint.timeout_s)
            if resp.status_code >= 500:
                raise ServiceUnavailable(f"HTTP {resp.status_code}")
            if resp.status_code >= 400:
                raise MalformedResponse(
                    f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as e:
                raise MalformedResponse(f"non-JSON response: {e}") from e
        return _with_retries(self.endpoint, attempt)


class HttpAttributeExtractor(_HttpBase, AttributeExtractor):
    def extract(self, garment: ImageRef, person: ImageRef) -> GarmentAttributes:
        body = self._post("/v1/extract", {
            "garment": garment.to_dict(), "person": person.to_dict()})
        try:
            return parse_attributes(body["attributes"])
        except (KeyError, attr.MalformedDocument, attr.UnknownCategory,
                attr.OutOfBankValue) as e:
            raise MalformedResponse(str(e)) from e


class HttpGarmentEditor(_HttpBase, GarmentEditor):
    def edit(self, garment: ImageRef, instruction: EditInstruction) -> ImageRef:
        body = self._post("/v1/edit", {
            "garment": garment.to_dict(),
            "instruction": instruction.forward_text})
        if body.get("status") == "rejected":
            raise EditRejected(body.get("reason", "edit rejected"))
        try:
            return ImageRef.from_dict(body["image"])
        except (KeyError, ValueError) as e:
            raise MalformedResponse(str(e)) from e


class HttpTryOn(_HttpBase, TryOnClient):
    def try_on(self, person: ImageRef, garment: ImageRef,
               mask: BinaryMask) -> ImageRef:
        body = self._post("/v1/try-on", {
            "person": person.to_dict(), "garment": garment.to_dict()})
        try:
            return ImageRef.from_dict(body["image"])
        except (KeyError, ValueError) as e:
            raise MalformedResponse(str(e)) from e


class HttpJudge(_HttpBase, JudgeClient):
    judge_id = "http-judge"

    def judge(self, original: ImageRef, edited: ImageRef,
              instruction_text: str) -> JudgeScore:
        body = self._post("/v1/judge", {
            "original": original.to_dict(), "edited": edited.to_dict(),
            "instruction": instruction_text})
        score = body.get("score")
        if not isinstance(score, (int, float)):
            raise UnparseableScore(f"no numeric score in response: {body!r}")
        return JudgeScore(s=float(score),
                          rationale=str(body.get("rationale", "")),
                          judge_id=str(body.get("judge_id", self.judge_id)))


@dataclass
class ClientBundle:
    """The four stage clients used by one pipeline run."""

    extractor: AttributeExtractor
    editor: GarmentEditor
    try_on: TryOnClient
    judge: JudgeClient
