"""Threshold filtering of judged samples and judge-vs-human calibration.

A sample is kept only when both its edited-garment and edited-person scores
strictly exceed the threshold. Calibration compares the judge's good/bad
classification (score > t) against human keep/discard verdicts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

CONFUSION_KEYS = ("good_keep", "good_discard", "bad_keep", "bad_discard")


class MissingScore(KeyError):
    """A labeled sample has no judge score."""


@dataclass(frozen=True)
class JudgeScore:
    """Scalar edit score in [0, 100] with the judge's rationale."""

    s: float
    rationale: str = ""
    judge_id: str = ""

    def __post_init__(self):
        if not 0.0 <= self.s <= 100.0:
            raise ValueError(f"score {self.s} outside [0, 100]")

    def to_dict(self) -> dict:
        return {"s": self.s, "rationale": self.rationale,
                "judge_id": self.judge_id}

    @classmethod
    def from_dict(cls, d: Mapping) -> "JudgeScore":
        return cls(s=float(d["s"]), rationale=d.get("rationale", ""),
                   judge_id=d.get("judge_id", ""))


@dataclass(frozen=True)
class HumanLabel:
    """One keep/discard verdict from one annotator."""

    sample_id: str
    verdict: str  # "keep" | "discard"
    annotator_id: str
    timestamp: float = 0.0

    def __post_init__(self):
        if self.verdict not in ("keep", "discard"):
            raise ValueError(f"verdict must be keep|discard, got {self.verdict!r}")


@dataclass(frozen=True)
class CalibrationReport:
    """2x2 confusion between judge classification and human verdicts."""

    threshold: float
    counts: dict[str, int]
    total: int
    proportions: dict[str, float] = field(default_factory=dict)
    accuracy: float = 0.0

    def render(self) -> str:
        lines = [f"threshold t = {self.threshold:g}  (n = {self.total})",
                 f"{'':14}{'keep':>10}{'discard':>10}"]
        lines.append(f"{'score > t':14}{self.counts['good_keep']:>10}"
                     f"{self.counts['good_discard']:>10}")
        lines.append(f"{'score <= t':14}{self.counts['bad_keep']:>10}"
                     f"{self.counts['bad_discard']:>10}")
        lines.append(f"accuracy: {self.accuracy:.1f}%")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "counts": dict(self.counts),
                "total": self.total, "proportions": dict(self.proportions),
                "accuracy": self.accuracy}


def passes_filter(score_garment: JudgeScore, score_person: JudgeScore,
                  t: float) -> bool:
    """True iff both scores strictly exceed the threshold."""
    if not 0.0 <= t <= 100.0:
        raise ValueError(f"threshold {t} outside [0, 100]")
    return score_garment.s > t and score_person.s > t


def resolve_verdicts(labels: Iterable[HumanLabel]) -> dict[str, str]:
    """Collapse labels to one verdict per sample.

    Last write wins within an annotator; majority across annotators; ties
    resolve to discard.
    """
    per_annotator: dict[tuple[str, str], HumanLabel] = {}
    for label in labels:
        key = (label.sample_id, label.annotator_id)
        prev = per_annotator.get(key)
        if prev is None or label.timestamp >= prev.timestamp:
            per_annotator[key] = label
    votes: dict[str, list[str]] = {}
    for (sample_id, _), label in per_annotator.items():
        votes.setdefault(sample_id, []).append(label.verdict)
    out = {}
    for sample_id, vs in votes.items():
        keeps = sum(1 for v in vs if v == "keep")
        out[sample_id] = "keep" if keeps * 2 > len(vs) else "discard"
    return out


def calibrate(labels: Iterable[HumanLabel],
              scores: Mapping[str, JudgeScore], t: float) -> CalibrationReport:
    """Confusion counts and accuracy of the judge against human verdicts."""
    verdicts = resolve_verdicts(labels)
    counts = {k: 0 for k in CONFUSION_KEYS}
    for sample_id, verdict in verdicts.items():
        if sample_id not in scores:
            raise MissingScore(sample_id)
        good = scores[sample_id].s > t
        key = ("good_" if good else "bad_") + verdict
        counts[key] += 1
    total = sum(counts.values())
    proportions = {k: (100.0 * v / total if total else 0.0)
                   for k, v in counts.items()}
    accuracy = proportions["good_keep"] + proportions["bad_discard"]
    return CalibrationReport(threshold=t, counts=counts, total=total,
                             proportions=proportions, accuracy=accuracy)


def sweep_threshold(labels: Iterable[HumanLabel],
                    scores: Mapping[str, JudgeScore],
                    grid: Iterable[float]) -> list[CalibrationReport]:
    """One calibration report per grid threshold."""
    grid = list(grid)
    if not grid:
        raise ValueError("threshold grid must be non-empty")
    labels = list(labels)
    return [calibrate(labels, scores, t) for t in grid]


class LabelLog:
    """Append-only JSONL log of human labels keyed by sample id."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, label: HumanLabel) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        record = {"sample_id": label.sample_id, "verdict": label.verdict,
                  "annotator_id": label.annotator_id,
                  "timestamp": label.timestamp}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()

    def read(self) -> list[HumanLabel]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(HumanLabel(sample_id=d["sample_id"],
                                  verdict=d["verdict"],
                                  annotator_id=d["annotator_id"],
                                  timestamp=float(d.get("timestamp", 0.0))))
        return out
