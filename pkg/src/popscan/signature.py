"""State abstraction: clickable-position signatures compared by LCS."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .gui import GuiNode, ScreenSnapshot, clickable_components

DEFAULT_GRID = 32
DEFAULT_THRESHOLD = 0.8
MAX_SIZE_BUCKET = 16


class SignatureToken(NamedTuple):
    gx: int
    gy: int
    wb: int
    hb: int


def size_bucket(length: int) -> int:
    # floor(log2(max(length, 1))) without float rounding
    return min(max(int(length), 1).bit_length() - 1, MAX_SIZE_BUCKET)


def token_for(node: GuiNode, grid: int = DEFAULT_GRID) -> SignatureToken:
    cx, cy = node.bounds.center
    return SignatureToken(cx // grid, cy // grid, size_bucket(node.bounds.width), size_bucket(node.bounds.height))


@dataclass(frozen=True)
class StateSignature:
    tokens: tuple[SignatureToken, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    def to_list(self) -> list[list[int]]:
        return [list(t) for t in self.tokens]

    @classmethod
    def from_list(cls, data: Sequence[Sequence[int]]) -> "StateSignature":
        return cls(tuple(SignatureToken(*map(int, t)) for t in data))


def signature_of_root(root: GuiNode, grid: int = DEFAULT_GRID) -> StateSignature:
    if grid < 1:
        raise ValueError("grid must be >= 1")
    return StateSignature(tuple(token_for(n, grid) for n in clickable_components(root)))


def signature_of(snapshot: ScreenSnapshot, grid: int = DEFAULT_GRID) -> StateSignature:
    return signature_of_root(snapshot.root, grid)


def lcs_length(a: StateSignature | Sequence, b: StateSignature | Sequence) -> int:
    """Length of the longest common subsequence, O(|a|*|b|) time, O(|b|) space."""
    xs = a.tokens if isinstance(a, StateSignature) else a
    ys = b.tokens if isinstance(b, StateSignature) else b
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        cur = [0]
        for j, y in enumerate(ys):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                cur.append(max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def similarity(a: StateSignature, b: StateSignature) -> float:
    """Dice-normalised LCS: 2*LCS / (|a| + |b|); 1.0 when both are empty."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * lcs_length(a, b) / total


class StateRegistry:
    """Maps signatures to dense integer state ids.

    The first signature inserted for a state stays its representative for
    the whole run, so resolution is replayable.
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD):
        if not 0.0 < threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        self.threshold = threshold
        self._states: list[StateSignature] = []
        self._exact: dict[StateSignature, int] = {}

    def __len__(self) -> int:
        return len(self._states)

    @property
    def states(self) -> list[tuple[int, StateSignature]]:
        return list(enumerate(self._states))

    def representative(self, state_id: int) -> StateSignature:
        return self._states[state_id]

    def resolve(self, sig: StateSignature) -> tuple[int, bool]:
        hit = self._exact.get(sig)
        if hit is not None:
            return hit, False
        best_id, best_sim = -1, -1.0
        for state_id, rep in enumerate(self._states):
            sim = similarity(sig, rep)
            if sim > best_sim:
                best_id, best_sim = state_id, sim
        if best_id >= 0 and best_sim >= self.threshold:
            return best_id, False
        self._states.append(sig)
        self._exact.setdefault(sig, len(self._states) - 1)
        return len(self._states) - 1, True

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "states": [{"state_id": i, "tokens": s.to_list()} for i, s in enumerate(self._states)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateRegistry":
        reg = cls(data["threshold"])
        for entry in sorted(data["states"], key=lambda e: e["state_id"]):
            sig = StateSignature.from_list(entry["tokens"])
            reg._states.append(sig)
            reg._exact.setdefault(sig, entry["state_id"])
        return reg
