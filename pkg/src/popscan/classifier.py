"""Pop-up type and sneaky-pattern labelling.

Type assignment runs permission checks first (foreign dialog package, then
permission phrasing), then promotional text, and defaults to functional
permission-unrelated. Pattern detectors are independent and may co-occur.
Text judgements go through a :class:`TextClassifier`; the bundled keyword
engine approximates a language-model classifier with cue lists loaded from
a versioned JSON rule pack.
"""

from __future__ import annotations

import copy
import functools
import json
import re
import string
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from .dismissal import Tier
from .gui import Rect
from .records import PowRecord

RULES_VERSION = 1


@functools.lru_cache(maxsize=1)
def _bundled_rules() -> dict:
    text = resources.files("popscan").joinpath("data/default_rules.json").read_text(encoding="utf-8")
    return json.loads(text)


class ClassifierFailure(RuntimeError):
    pass


class PowType(str, Enum):
    PROMOTIONAL = "Promotional"
    FUNCTIONAL_PERMISSION_RELATED = "FunctionalPermissionRelated"
    FUNCTIONAL_PERMISSION_UNRELATED = "FunctionalPermissionUnrelated"


class SneakyPattern(str, Enum):
    TEXT_MISLEAD = "TextMislead"
    UI_MISLEAD = "UiMislead"
    FORCED_ACTION = "ForcedAction"
    PRIVACY_INTRUSIVE_DEFAULT = "PrivacyIntrusiveDefault"
    OUT_OF_CONTEXT = "OutOfContext"


@dataclass
class ClassifierRules:
    permission_patterns: list[str]
    promotional_cues: list[str]
    text_mislead_cues: list[str]
    free_charge_terms: list[str]
    free_window: int = 4
    dismiss_words: list[str] = field(default_factory=lambda: ["cancel", "close", "no thanks", "skip"])
    privacy_keywords: list[str] = field(default_factory=list)
    out_of_context_jaccard: float = 0.1
    ui_mislead_contrast_ratio: float = 0.5
    ui_mislead_ring_px: int = 8
    canonical_position_tolerance: float = 0.1
    version: int = RULES_VERSION

    def __post_init__(self) -> None:
        self._permission_res = [re.compile(p, re.IGNORECASE) for p in self.permission_patterns]

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierRules":
        if data.get("version", RULES_VERSION) != RULES_VERSION:
            raise ValueError(f"unsupported rule pack version {data.get('version')}")
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ClassifierRules":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "ClassifierRules":
        return cls.from_dict(copy.deepcopy(_bundled_rules()))

    def extend(self, other: dict) -> "ClassifierRules":
        """Merge a locale pack: list fields are appended, scalars replaced."""
        merged = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in other.items():
            if k not in merged:
                continue
            merged[k] = list(merged[k]) + list(v) if isinstance(merged[k], list) else v
        return ClassifierRules(**merged)

    def matches_permission(self, text: str) -> bool:
        return any(r.search(text) for r in self._permission_res)


class TextClassifier(Protocol):
    def classify(self, texts: Sequence[str], task: str) -> tuple[bool, float]:
        ...


def _cue_regex(cue: str) -> re.Pattern:
    body = re.escape(cue.lower())
    if cue.isascii():
        if cue[:1].isalnum():
            body = r"\b" + body
        if cue[-1:].isalnum():
            body = body + r"\b"
    return re.compile(body)


class KeywordClassifier:
    """Deterministic cue-list engine; the default :class:`TextClassifier`."""

    TASKS = ("promotional", "text_mislead", "ui_mislead_hint")

    def __init__(self, rules: Optional[ClassifierRules] = None):
        self.rules = rules or ClassifierRules.default()
        self._promo = [_cue_regex(c) for c in self.rules.promotional_cues]
        self._mislead = [_cue_regex(c) for c in self.rules.text_mislead_cues]
        self._dismiss = {normalize_phrase(w) for w in self.rules.dismiss_words}

    @staticmethod
    def _confidence(hits: int) -> float:
        return min(1.0, 0.5 + 0.25 * hits)

    def _free_with_charge(self, text: str) -> bool:
        tokens = text.lower().split()
        window = self.rules.free_window
        for i, tok in enumerate(tokens):
            if tok.strip(string.punctuation) != "free":
                continue
            near = tokens[max(0, i - window):i] + tokens[i + 1:i + 1 + window]
            joined = " ".join(near)
            if any(term in joined for term in self.rules.free_charge_terms):
                return True
        return False

    def classify(self, texts: Sequence[str], task: str) -> tuple[bool, float]:
        if task not in self.TASKS:
            raise ClassifierFailure(f"unknown task {task!r}")
        lowered = [t.lower() for t in texts]
        if task == "promotional":
            hits = sum(1 for r in self._promo if any(r.search(t) for t in lowered))
        elif task == "text_mislead":
            hits = sum(1 for r in self._mislead if any(r.search(t) for t in lowered))
            hits += sum(1 for t in texts if self._free_with_charge(t))
        else:
            hits = sum(1 for t in texts if normalize_phrase(t) in self._dismiss)
        return hits > 0, self._confidence(hits)


# --------------------------------------------------------------------------
# helpers

_PUNCT = str.maketrans({c: " " for c in string.punctuation})


def normalize_tokens(text: str) -> list[str]:
    return text.lower().translate(_PUNCT).split()


def normalize_phrase(text: str) -> str:
    return " ".join(normalize_tokens(text))


def _token_set(texts: Iterable[str]) -> set[str]:
    # unigrams plus joined neighbour pairs, so "check out" meets "checkout"
    out: set[str] = set()
    for text in texts:
        toks = normalize_tokens(text)
        out.update(toks)
        out.update(a + b for a, b in zip(toks, toks[1:]))
    return out


def token_jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    sa, sb = _token_set(a), _token_set(b)
    union = sa | sb
    if not sa or not sb or not union:
        return 0.0
    return len(sa & sb) / len(union)


LOW_CONFIDENCE = 0.5


def _ask(clf: TextClassifier, fallback: TextClassifier, texts, task) -> tuple[bool, bool]:
    """Returns (decision, low_confidence)."""
    try:
        decision, conf = clf.classify(texts, task)
    except ClassifierFailure:
        decision, _conf = fallback.classify(texts, task)
        return decision, True
    return decision, conf < LOW_CONFIDENCE


# --------------------------------------------------------------------------
# type

def classify_type_flagged(
    record: PowRecord,
    text_classifier: Optional[TextClassifier] = None,
    rules: Optional[ClassifierRules] = None,
) -> tuple[PowType, bool]:
    rules = rules or ClassifierRules.default()
    fallback = KeywordClassifier(rules)
    clf = text_classifier or fallback
    if record.dialog_package != record.source_app_package:
        return PowType.FUNCTIONAL_PERMISSION_RELATED, False
    if any(rules.matches_permission(t) for t in record.texts):
        return PowType.FUNCTIONAL_PERMISSION_RELATED, False
    promotional, low = _ask(clf, fallback, record.texts, "promotional")
    if promotional:
        return PowType.PROMOTIONAL, low
    return PowType.FUNCTIONAL_PERMISSION_UNRELATED, low


def classify_type(record, text_classifier=None, rules=None) -> PowType:
    return classify_type_flagged(record, text_classifier, rules)[0]


# --------------------------------------------------------------------------
# patterns

def detect_forced_action(record: PowRecord) -> bool:
    d = record.dismissal
    if d.forced_action_evidence:
        return True
    return (not d.had_model_exit) and d.back_used and not d.dismissed_by_back and not d.dismissed


def detect_privacy_default(record: PowRecord, rules: Optional[ClassifierRules] = None) -> bool:
    rules = rules or ClassifierRules.default()
    cues = [_cue_regex(k) for k in rules.privacy_keywords]
    return any(any(c.search(t.context_text.lower()) for c in cues) for t in record.pre_checked_toggles)


def detect_out_of_context(record: PowRecord, rules: Optional[ClassifierRules] = None,
                          threshold: Optional[float] = None) -> bool:
    rules = rules or ClassifierRules.default()
    if threshold is None:
        threshold = rules.out_of_context_jaccard
    trig = record.trigger
    if trig.spontaneous or trig.prev_action_kind == "back":
        return True
    return token_jaccard([trig.prev_component_text], record.texts) < threshold


def detect_text_mislead_flagged(record: PowRecord, text_classifier=None, rules=None) -> tuple[bool, bool]:
    if not record.texts:
        return False, False
    rules = rules or ClassifierRules.default()
    fallback = KeywordClassifier(rules)
    clf = text_classifier or fallback
    try:
        decision, conf = clf.classify(record.texts, "text_mislead")
    except ClassifierFailure:
        return False, True
    return decision, conf < LOW_CONFIDENCE


def detect_text_mislead(record, text_classifier=None, rules=None) -> bool:
    return detect_text_mislead_flagged(record, text_classifier, rules)[0]


def _luma(image: np.ndarray) -> np.ndarray:
    return image[..., 0] * 0.299 + image[..., 1] * 0.587 + image[..., 2] * 0.114


def contrast(image: np.ndarray, box: Rect, ring_px: int = 8) -> float:
    """|mean luma inside box - mean luma of the surrounding ring|."""
    h, w = image.shape[:2]
    l, t = max(box.left - ring_px, 0), max(box.top - ring_px, 0)
    r, b = min(box.right + ring_px, w), min(box.bottom + ring_px, h)
    outer = _luma(image[t:b, l:r].astype(np.float64))
    inner_mask = np.zeros(outer.shape, dtype=bool)
    inner_mask[box.top - t:box.bottom - t, box.left - l:box.right - l] = True
    if not inner_mask.any() or inner_mask.all():
        return 0.0
    return float(abs(outer[inner_mask].mean() - outer[~inner_mask].mean()))


def _similar_box(a: Rect, b: Rect, tol: float) -> bool:
    if b.width == 0 or b.height == 0:
        return False
    return (
        abs(a.left - b.left) <= tol * b.width
        and abs(a.top - b.top) <= tol * b.height
        and abs(a.width - b.width) <= tol * b.width
        and abs(a.height - b.height) <= tol * b.height
    )


def _split_targets(record: PowRecord, rules: ClassifierRules):
    dismiss_words = {normalize_phrase(w) for w in rules.dismiss_words}
    dismiss, confirm = [], []
    for t in record.targets:
        if t.bbox is None:
            continue
        if t.tier is Tier.MODEL_EXIT or normalize_phrase(t.source_text) in dismiss_words:
            dismiss.append(t)
        else:
            confirm.append(t)
    return dismiss, confirm


def dismiss_boxes(record: PowRecord, rules: Optional[ClassifierRules] = None) -> list[Rect]:
    rules = rules or ClassifierRules.default()
    return [t.bbox for t in _split_targets(record, rules)[0]]


def detect_ui_mislead(
    record: PowRecord,
    rules: Optional[ClassifierRules] = None,
    canonical_dismiss: Sequence[Rect] = (),
) -> bool:
    rules = rules or ClassifierRules.default()
    if len(record.detection.buttons) < 2 and len(record.in_box_targets) < 2:
        return False
    dismiss, confirm = _split_targets(record, rules)
    image = record.screenshot
    if image is not None and dismiss and confirm:
        ring = rules.ui_mislead_ring_px
        prominent = max(contrast(image, t.bbox, ring) for t in confirm)
        if any(contrast(image, d.bbox, ring) < rules.ui_mislead_contrast_ratio * prominent for d in dismiss):
            return True
    tol = rules.canonical_position_tolerance
    return any(_similar_box(c.bbox, box, tol) for c in confirm for box in canonical_dismiss)


@dataclass
class LabelResult:
    pow_type: PowType
    patterns: frozenset
    low_confidence: dict

    @property
    def sneaky(self) -> bool:
        return bool(self.patterns)

    def to_dict(self) -> dict:
        return {
            "type": self.pow_type.value,
            "patterns": sorted(p.value for p in self.patterns),
            "sneaky": self.sneaky,
            "low_confidence": dict(sorted(self.low_confidence.items())),
        }


def label(
    record: PowRecord,
    text_classifier: Optional[TextClassifier] = None,
    rules: Optional[ClassifierRules] = None,
    canonical_dismiss: Sequence[Rect] = (),
) -> LabelResult:
    rules = rules or ClassifierRules.default()
    pow_type, type_low = classify_type_flagged(record, text_classifier, rules)
    mislead, mislead_low = detect_text_mislead_flagged(record, text_classifier, rules)
    checks = {
        SneakyPattern.TEXT_MISLEAD: mislead,
        SneakyPattern.UI_MISLEAD: detect_ui_mislead(record, rules, canonical_dismiss),
        SneakyPattern.FORCED_ACTION: detect_forced_action(record),
        SneakyPattern.PRIVACY_INTRUSIVE_DEFAULT: detect_privacy_default(record, rules),
        SneakyPattern.OUT_OF_CONTEXT: detect_out_of_context(record, rules),
    }
    return LabelResult(
        pow_type=pow_type,
        patterns=frozenset(p for p, hit in checks.items() if hit),
        low_confidence={"type": type_low, SneakyPattern.TEXT_MISLEAD.value: mislead_low},
    )


def label_records(
    records: Sequence[PowRecord],
    text_classifier: Optional[TextClassifier] = None,
    rules: Optional[ClassifierRules] = None,
) -> list[LabelResult]:
    """Label a run's records; dismiss positions of sibling pop-ups feed the UI check."""
    rules = rules or ClassifierRules.default()
    boxes = {r.id: dismiss_boxes(r, rules) for r in records}
    results = []
    for rec in records:
        siblings = [
            b for other in records
            if other.id != rec.id and other.source_app_package == rec.source_app_package
            for b in boxes[other.id]
        ]
        res = label(rec, text_classifier, rules, siblings)
        rec.labels = res.to_dict()
        results.append(res)
    return results
