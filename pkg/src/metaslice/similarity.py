"""Function-configuration similarity between a request and running instances.

Each slice names the functions it needs as a fixed-length set of slots,
one K-bit configuration vector per slot; the all-zero vector means the
slot is unused. Slot-level similarity is the Jaccard index of the two
bit vectors, and the slice-level index averages slot similarities over
all slots, so a request sharing 3 of 9 slots scores 3/9. Slots whose
share count has reached the cap are not shareable; by default they also
stop contributing to the index, so the score reflects resources that can
actually be saved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FunctionSet:
    """Per-slice function configuration: one K-bit vector per slot."""

    slots: np.ndarray  # (num_slots, config_bits) uint8, entries in {0, 1}

    def __post_init__(self):
        arr = np.ascontiguousarray(self.slots)
        if arr.ndim != 2:
            raise ValueError("slots must be a 2-D (num_slots, config_bits) array")
        if not ((arr == 0) | (arr == 1)).all():
            raise ValueError("slot configuration entries must be 0 or 1")
        object.__setattr__(self, "slots", arr.astype(np.uint8, copy=False))

    @property
    def num_slots(self) -> int:
        return self.slots.shape[0]

    @property
    def config_bits(self) -> int:
        return self.slots.shape[1]

    def required_slots(self) -> np.ndarray:
        """Indices of non-trivial slots."""
        return np.flatnonzero(self.slots.any(axis=1))

    @classmethod
    def from_slot_indices(cls, indices, num_slots: int, config_bits: int = 1,
                          configs: np.ndarray | None = None) -> "FunctionSet":
        """Build a set that is non-trivial exactly on ``indices``.

        ``configs`` optionally gives the (len(indices), config_bits) bit
        patterns; the default is all-ones per required slot.
        """
        slots = np.zeros((num_slots, config_bits), dtype=np.uint8)
        idx = np.asarray(indices, dtype=int).ravel()
        if idx.size:
            if configs is None:
                slots[idx] = 1
            else:
                slots[idx] = np.asarray(configs, dtype=np.uint8)
        return cls(slots)


@dataclass(frozen=True)
class InstanceView:
    """What the similarity analysis sees of one running instance."""

    instance_id: int
    functions: FunctionSet
    share_counts: np.ndarray  # (num_slots,) int, count of the joinable record

    def __post_init__(self):
        counts = np.ascontiguousarray(self.share_counts, dtype=np.int64)
        if counts.shape != (self.functions.num_slots,):
            raise ValueError("share_counts length must match the slot count")
        if (counts < 0).any():
            raise ValueError("share_counts must be >= 0")
        object.__setattr__(self, "share_counts", counts)


@dataclass(frozen=True)
class SimilarityReport:
    """Best-matching instance for a request, if any."""

    best_instance_id: int | None
    similarity: float
    shareable_slots: frozenset[int] = field(default_factory=frozenset)

    @classmethod
    def no_match(cls) -> "SimilarityReport":
        return cls(best_instance_id=None, similarity=0.0)


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """Jaccard similarity of two equal-length binary vectors.

    Computed as a.b / (|a|^2 + |b|^2 - a.b), which for 0/1 vectors is
    |intersection| / |union|. Two all-zero vectors score 0 by convention:
    a function absent from both sides carries no sharing value.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    dot = float(a @ b)
    denom = float(a @ a) + float(b @ b) - dot
    if denom <= 0.0:
        return 0.0
    return dot / denom


def _slot_jaccards(request: FunctionSet, instance: FunctionSet) -> np.ndarray:
    """Vectorized per-slot Jaccard scores, zeros where undefined."""
    a = request.slots.astype(np.float64)
    b = instance.slots.astype(np.float64)
    dots = np.einsum("fk,fk->f", a, b)
    denom = (a * a).sum(axis=1) + (b * b).sum(axis=1) - dots
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def similarity_index(request: FunctionSet, instance: FunctionSet,
                     share_counts: np.ndarray, cap: int,
                     capacity_aware: bool = True) -> tuple[float, frozenset[int]]:
    """Slice-level similarity of a request against one instance.

    Returns the index (mean of contributing slot scores over all slots)
    and the shareable slots: non-trivial instance slots with positive
    overlap whose share count is still below ``cap``. When
    ``capacity_aware`` is true (default), capped slots contribute 0 to
    the index as well; otherwise they keep their raw score but remain
    unshareable.
    """
    if request.num_slots != instance.num_slots:
        raise ValueError("request and instance must have the same slot count")
    counts = np.asarray(share_counts, dtype=np.int64)
    if counts.shape != (request.num_slots,):
        raise ValueError("share_counts length must match the slot count")

    scores = _slot_jaccards(request, instance)
    present = instance.slots.any(axis=1)
    below_cap = counts < cap
    shareable = present & below_cap & (scores > 0.0)
    contributing = (present & below_cap) if capacity_aware else present
    j = float(scores[contributing].sum()) / request.num_slots
    return j, frozenset(np.flatnonzero(shareable).tolist())


def best_match(request: FunctionSet, instances: list[InstanceView], cap: int,
               capacity_aware: bool = True) -> SimilarityReport:
    """Pick the instance with the highest similarity index.

    Ties break toward the lowest instance id for reproducibility. An
    empty list, or a best score of zero, yields a no-match report.
    """
    best: SimilarityReport = SimilarityReport.no_match()
    best_id = None
    for view in sorted(instances, key=lambda v: v.instance_id):
        j, shareable = similarity_index(request, view.functions, view.share_counts,
                                        cap, capacity_aware=capacity_aware)
        if j > best.similarity and j > 0.0:
            best = SimilarityReport(view.instance_id, j, shareable)
            best_id = view.instance_id
    if best_id is None:
        return SimilarityReport.no_match()
    return best
