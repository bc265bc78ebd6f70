"""Metric families for the inverse-editing benchmark.

Distributional metrics (FID, KID) operate on embedding FeatureSets from a
pluggable extractor; pixel metrics (SSIM) and perceptual proxies operate on
aligned image pairs. Reports break DISTS and DINO-I down by edit type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .instructions import EditType
from .store import BenchmarkTask, BenchmarkTaskKind

# SSIM defaults: 11x11 Gaussian window, sigma 1.5, standard stabilizers.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0

# Eigenvalues of the covariance square-root product in [-EIG_TOL, 0) clamp
# to zero; anything lower signals a degenerate covariance.
EIG_TOL = 1e-8

KID_REPORT_SCALE = 100.0


class DimensionMismatch(ValueError):
    """Feature sets have different dimensionality."""


class ResolutionMismatch(ValueError):
    """Images to compare have different resolutions."""


class DegenerateCovariance(ValueError):
    """Covariance square root produced a non-finite or invalid result."""


class ZeroVector(ValueError):
    """Cosine similarity is undefined for a zero embedding."""


class MissingPrediction(KeyError):
    """A benchmark task has no prediction image."""


@dataclass(frozen=True)
class FeatureSet:
    """n x d embedding matrix from one extractor."""

    vectors: np.ndarray
    extractor_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature set must be a 2-d matrix")
        if not np.isfinite(v).all():
            raise ValueError("feature set contains non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def _to_gray(image: np.ndarray) -> np.ndarray:
    """Rec.601 luminance for RGB inputs; float64 passthrough for 2-d arrays."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
    return img


def _gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA) -> float:
    """Structural similarity over a Gaussian-weighted sliding window.

    The window shrinks to the smaller image dimension (kept odd) so that
    small fixtures remain comparable. ssim(x, x) == 1 for any x; constant
    images of equal value also score 1 via the stabilizing constants.
    """
    ga, gb = _to_gray(a), _to_gray(b)
    if ga.shape != gb.shape:
        raise ResolutionMismatch(f"{ga.shape} vs {gb.shape}")
    win = min(window, ga.shape[0], ga.shape[1])
    if win % 2 == 0:
        win -= 1
    kernel = _gaussian_kernel1d(win, sigma)
    w2d = np.outer(kernel, kernel)

    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    h, w = ga.shape
    rows = h - win + 1
    cols = w - win + 1
    # sliding windows (rows, cols, win, win)
    wa = np.lib.stride_tricks.sliding_window_view(ga, (win, win))
    wb = np.lib.stride_tricks.sliding_window_view(gb, (win, win))
    mu_a = np.einsum("ijkl,kl->ij", wa, w2d)
    mu_b = np.einsum("ijkl,kl->ij", wb, w2d)
    var_a = np.einsum("ijkl,kl->ij", wa * wa, w2d) - mu_a ** 2
    var_b = np.einsum("ijkl,kl->ij", wb * wb, w2d) - mu_b ** 2
    cov = np.einsum("ijkl,kl->ij", wa * wb, w2d) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    del rows, cols
    return float(ssim_map.mean())


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition with clamping."""
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < -EIG_TOL * max(1.0, abs(vals.max())):
        raise DegenerateCovariance(
            f"matrix has eigenvalue {vals.min():.3e} below tolerance")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(p: FeatureSet, q: FeatureSet) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    ||mu_p - mu_q||^2 + Tr(S_p + S_q - 2 (S_p S_q)^{1/2}); the trace of the
    product square root is computed via the symmetric equivalent
    S_p^{1/2} S_q S_p^{1/2}, whose eigenvalues are clamped at zero within
    tolerance.
    """
    if p.d != q.d:
        raise DimensionMismatch(f"{p.d} vs {q.d}")
    if p.n < 2 or q.n < 2:
        raise ValueError("distributional metrics need n >= 2 per set")
    mu_p = p.vectors.mean(axis=0)
    mu_q = q.vectors.mean(axis=0)
    cov_p = np.cov(p.vectors, rowvar=False).reshape(p.d, p.d)
    cov_q = np.cov(q.vectors, rowvar=False).reshape(q.d, q.d)
    sp = _sqrtm_psd(cov_p)
    inner = sp @ cov_q @ sp
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    if vals.min() < -EIG_TOL * max(1.0, abs(vals.max())):
        raise DegenerateCovariance(
            f"cross-covariance eigenvalue {vals.min():.3e} below tolerance")
    tr_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    value = float(np.sum((mu_p - mu_q) ** 2)
                  + np.trace(cov_p) + np.trace(cov_q) - 2.0 * tr_sqrt)
    if not np.isfinite(value):
        raise DegenerateCovariance("non-finite Frechet distance")
    return max(value, 0.0)


def _poly_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def kid(p: FeatureSet, q: FeatureSet) -> float:
    """Unbiased squared MMD with the degree-3 polynomial kernel, x100.

    For equal sample sizes the cross term omits matched indices, so
    kid(X, X) is exactly zero. No subset averaging is applied.
    """
    if p.d != q.d:
        raise DimensionMismatch(f"{p.d} vs {q.d}")
    if p.n < 2 or q.n < 2:
        raise ValueError("KID needs n >= 2 per set")
    x, y = p.vectors, q.vectors
    m, n = p.n, q.n
    kxx = _poly_kernel(x, x)
    kyy = _poly_kernel(y, y)
    kxy = _poly_kernel(x, y)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    if m == n:
        cross = (kxy.sum() - np.trace(kxy)) / (m * (m - 1))
    else:
        cross = kxy.mean()
    return float((sum_xx + sum_yy - 2.0 * cross) * KID_REPORT_SCALE)


def dino_i(gen: np.ndarray, gt: np.ndarray) -> float:
    """Cosine similarity between two embedding vectors."""
    a = np.asarray(gen, dtype=np.float64).ravel()
    b = np.asarray(gt, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for zero vectors")
    return float(a @ b / (na * nb))


def dino_i_batch(gen: FeatureSet, gt: FeatureSet) -> float:
    """Mean per-pair cosine similarity over two aligned feature sets."""
    if gen.d != gt.d or gen.n != gt.n:
        raise DimensionMismatch("feature sets must align pairwise")
    return float(np.mean([dino_i(gen.vectors[i], gt.vectors[i])
                          for i in range(gen.n)]))


class PerceptualService:
    """Contract for the LPIPS/DISTS perceptual-distance service."""

    def distance(self, a: np.ndarray, b: np.ndarray, kind: str) -> float:
        raise NotImplementedError


class MockPerceptualService(PerceptualService):
    """Deterministic offline proxies for the perceptual metrics.

    lpips proxy: mean absolute pixel difference scaled to [0, 1].
    dists proxy: root-mean-square pixel difference scaled to [0, 1].
    Both are 0 for identical inputs.
    """

    def distance(self, a: np.ndarray, b: np.ndarray, kind: str) -> float:
        if a.shape != b.shape:
            raise ResolutionMismatch(f"{a.shape} vs {b.shape}")
        diff = (np.asarray(a, dtype=np.float64)
                - np.asarray(b, dtype=np.float64)) / 255.0
        if kind == "lpips":
            return float(np.abs(diff).mean())
        if kind == "dists":
            return float(np.sqrt((diff ** 2).mean()))
        raise ValueError(f"unknown perceptual kind {kind!r}")


def perceptual(a: np.ndarray, b: np.ndarray, kind: str,
               service: PerceptualService | None = None) -> float:
    """Perceptual distance via the feature/perceptual service contract."""
    from .clients import ServiceUnavailable
    if service is None:
        raise ServiceUnavailable("no perceptual service configured")
    return service.distance(a, b, kind)


class FeatureExtractor:
    """Contract for the image-embedding service used by FID/KID/DINO-I."""

    extractor_id = "abstract"

    def extract(self, images: Sequence[np.ndarray]) -> FeatureSet:
        raise NotImplementedError


class MockFeatureExtractor(FeatureExtractor):
    """Offline embedding: 8x8 block-mean grayscale, flattened to 64-d."""

    extractor_id = "mock-blockmean-8x8"
    grid = 8

    def extract(self, images: Sequence[np.ndarray]) -> FeatureSet:
        vecs = [self._embed(img) for img in images]
        return FeatureSet(np.stack(vecs), extractor_id=self.extractor_id)

    def _embed(self, image: np.ndarray) -> np.ndarray:
        gray = _to_gray(image) / 255.0
        h, w = gray.shape
        g = self.grid
        rows = np.linspace(0, h, g + 1).astype(int)
        cols = np.linspace(0, w, g + 1).astype(int)
        out = np.empty((g, g), dtype=np.float64)
        for i in range(g):
            for j in range(g):
                block = gray[rows[i]:max(rows[i + 1], rows[i] + 1),
                             cols[j]:max(cols[j + 1], cols[j] + 1)]
                out[i, j] = block.mean()
        return out.ravel()


@dataclass(frozen=True)
class MetricReport:
    """Per-task metric table with per-edit-type DISTS / DINO-I rows."""

    task: BenchmarkTaskKind
    n_tasks: int
    overall: dict[str, float]
    per_edit_type: dict[EditType, dict[str, float | None]] = field(
        default_factory=dict)

    def render(self) -> str:
        lines = [f"task: {self.task.value}  (n = {self.n_tasks})", "overall:"]
        for name, value in self.overall.items():
            lines.append(f"  {name:<8}{value:.4f}")
        if self.per_edit_type:
            lines.append("per edit type:       DISTS    DINO-I       n")
            for et in EditType:
                row = self.per_edit_type[et]
                dists = "   -  " if row["dists"] is None else f"{row['dists']:.4f}"
                dino = "   -  " if row["dino_i"] is None else f"{row['dino_i']:.4f}"
                lines.append(f"  {et.value:<18}{dists:>8}{dino:>10}"
                             f"{int(row['count']):>8}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "n_tasks": self.n_tasks,
            "overall": dict(self.overall),
            "per_edit_type": {et.value: dict(row)
                              for et, row in self.per_edit_type.items()},
        }


def evaluate(tasks: Sequence[BenchmarkTask],
             predictions: Mapping[str, np.ndarray] | str | Path,
             extractor: FeatureExtractor | None = None,
             perceptual_service: PerceptualService | None = None,
             ) -> MetricReport:
    """Score one prediction per task against its ground truth.

    The unpaired VTON setting has no pixel-aligned ground truth, so only
    FID, KID, and DINO-I are reported there; paired settings add SSIM,
    LPIPS, and DISTS. Per-edit-type DISTS/DINO-I rows exist for all seven
    edit types (None where the group is empty).
    """
    from .clients import load_image
    if not tasks:
        raise ValueError("no tasks to evaluate")
    kind = tasks[0].kind
    extractor = extractor or MockFeatureExtractor()
    perceptual_service = perceptual_service or MockPerceptualService()

    def prediction_for(task_id: str) -> np.ndarray:
        if isinstance(predictions, Mapping):
            if task_id not in predictions:
                raise MissingPrediction(task_id)
            return np.asarray(predictions[task_id])
        path = Path(predictions) / f"{task_id}.png"
        if not path.exists():
            raise MissingPrediction(task_id)
        return load_image(path)

    ordered = sorted(tasks, key=lambda t: t.task_id)
    gts, preds = [], []
    for task in ordered:
        pred = prediction_for(task.task_id)
        gt = load_image(task.ground_truth)
        if pred.shape != gt.shape:
            raise ResolutionMismatch(
                f"task {task.task_id}: prediction {pred.shape} "
                f"vs ground truth {gt.shape}")
        preds.append(pred)
        gts.append(gt)

    pred_feats = extractor.extract(preds)
    gt_feats = extractor.extract(gts)
    pixel_aligned = kind is not BenchmarkTaskKind.VTON_UNPAIRED

    dists_vals = [perceptual_service.distance(p, g, "dists")
                  for p, g in zip(preds, gts)]
    dino_vals = [dino_i(pred_feats.vectors[i], gt_feats.vectors[i])
                 for i in range(len(ordered))]

    overall: dict[str, float] = {}
    if pixel_aligned:
        overall["ssim"] = float(np.mean(
            [ssim(p, g) for p, g in zip(preds, gts)]))
        overall["lpips"] = float(np.mean(
            [perceptual_service.distance(p, g, "lpips")
             for p, g in zip(preds, gts)]))
        overall["dists"] = float(np.mean(dists_vals))
    overall["fid"] = fid(pred_feats, gt_feats)
    overall["kid"] = kid(pred_feats, gt_feats)
    overall["dino_i"] = float(np.mean(dino_vals))

    per_type: dict[EditType, dict[str, float | None]] = {}
    for et in EditType:
        idx = [i for i, t in enumerate(ordered) if t.edit_type is et]
        per_type[et] = {
            "dists": float(np.mean([dists_vals[i] for i in idx])) if idx else None,
            "dino_i": float(np.mean([dino_vals[i] for i in idx])) if idx else None,
            "count": float(len(idx)),
        }
    return MetricReport(task=kind, n_tasks=len(ordered), overall=overall,
                        per_edit_type=per_type)
