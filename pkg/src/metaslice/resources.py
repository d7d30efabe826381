"""Resource pool, running slices, and shared-function instance bookkeeping.

Slices are grouped into instances. Within an instance each required
function runs as a record with a share count; a joining slice either
increments the count of an existing record for that slot (paying
nothing) or spawns a fresh record (paying its resources). Records whose
count reaches zero are removed and refund the pool; instances with no
members are deleted.

Sharing never crosses instances: a request is matched against one
instance and shares only that instance's records. Each record is capped
at ``share_cap`` concurrent slices; a capped slot looks unshareable to
the similarity analysis, and a joiner then pays for a duplicate record
inside the same instance.

Every record's cost is attributed to exactly one running slice (its
payer, transferred to a surviving sharer if the payer departs first), so
available resources plus the charges of running slices always equal the
capacity exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .similarity import FunctionSet, InstanceView, SimilarityReport, best_match


class InsufficientResourcesError(RuntimeError):
    """Placement was attempted without the caller checking capacity first."""


class UnknownSliceError(KeyError):
    """Release of a slice id that is not running."""


@dataclass
class MetaSliceSpec:
    """One requested slice: its class, functions, and per-function demand."""

    class_id: int
    functions: FunctionSet
    function_resources: np.ndarray  # (num_slots, num_resource_types), rows zero on unused slots

    def __post_init__(self):
        res = np.ascontiguousarray(self.function_resources, dtype=np.float64)
        if res.ndim != 2 or res.shape[0] != self.functions.num_slots:
            raise ValueError("function_resources must be (num_slots, num_resource_types)")
        if (res < 0).any():
            raise ValueError("function_resources must be >= 0")
        demanding = res.any(axis=1)
        required = self.functions.slots.any(axis=1)
        if (demanding & ~required).any():
            bad = int(np.flatnonzero(demanding & ~required)[0])
            raise ValueError(f"slot {bad} carries resources but no configuration")
        self.function_resources = res

    def required_slots(self) -> np.ndarray:
        return self.functions.required_slots()

    def total_demand(self) -> np.ndarray:
        return self.function_resources.sum(axis=0)


@dataclass
class FunctionInstanceRecord:
    record_id: int
    slot: int
    config: np.ndarray  # (config_bits,) uint8
    resources: np.ndarray  # (num_resource_types,)
    share_count: int = 1
    payer: int = -1  # slice id currently charged for this record


@dataclass
class MetaInstance:
    instance_id: int
    num_slots: int
    config_bits: int
    records: dict[int, FunctionInstanceRecord] = field(default_factory=dict)
    members: dict[int, dict[int, int]] = field(default_factory=dict)  # slice -> slot -> record
    # Per-slot view of the record a joiner would share: lowest-count record,
    # ties to the lowest record id. Kept in sync on every mutation.
    join_configs: np.ndarray = None
    join_counts: np.ndarray = None

    def __post_init__(self):
        if self.join_configs is None:
            self.join_configs = np.zeros((self.num_slots, self.config_bits), dtype=np.uint8)
        if self.join_counts is None:
            self.join_counts = np.zeros(self.num_slots, dtype=np.int64)

    def joinable_record(self, slot: int) -> FunctionInstanceRecord | None:
        best = None
        for rec in self.records.values():
            if rec.slot != slot:
                continue
            if best is None or (rec.share_count, rec.record_id) < (best.share_count, best.record_id):
                best = rec
        return best

    def refresh_slot(self, slot: int):
        rec = self.joinable_record(slot)
        if rec is None:
            self.join_configs[slot] = 0
            self.join_counts[slot] = 0
        else:
            self.join_configs[slot] = rec.config
            self.join_counts[slot] = rec.share_count

    def view(self) -> InstanceView:
        return InstanceView(self.instance_id, FunctionSet(self.join_configs.copy()),
                            self.join_counts.copy())


@dataclass
class PlacementOutcome:
    instance_id: int
    created_new: bool


@dataclass
class SliceRecord:
    slice_id: int
    class_id: int
    instance_id: int
    slot_to_record: dict[int, int]
    charged: np.ndarray


def admission_footprint(spec: MetaSliceSpec, report: SimilarityReport,
                        sharing_enabled: bool) -> np.ndarray:
    """Resources this request would occupy: demand of its unshared slots."""
    if not sharing_enabled or report.best_instance_id is None:
        return spec.total_demand().copy()
    keep = np.ones(spec.functions.num_slots, dtype=bool)
    for f in report.shareable_slots:
        keep[f] = False
    return spec.function_resources[keep].sum(axis=0)


class ResourceManager:
    """Owns capacity and all mutable placement state. Single-threaded."""

    def __init__(self, capacity, share_cap: int, capacity_aware_similarity: bool = True):
        self.capacity = np.ascontiguousarray(capacity, dtype=np.float64)
        if self.capacity.ndim != 1 or (self.capacity <= 0).any():
            raise ValueError("capacity must be a 1-D positive vector")
        self.share_cap = int(share_cap)
        self.capacity_aware_similarity = capacity_aware_similarity
        self.available = self.capacity.copy()
        self.instances: dict[int, MetaInstance] = {}
        self.slices: dict[int, SliceRecord] = {}
        self._next_instance_id = 0
        self._next_record_id = 0
        # Stacked copies of every instance's per-slot join view, kept in
        # sync on mutation so matching is one vectorized pass.
        self._rows: dict[int, int] = {}
        self._stack_cfg = np.zeros((0, 0, 0))
        self._stack_counts = np.zeros((0, 0), dtype=np.int64)

    def _rebuild_stack(self):
        self._rows = {iid: row for row, iid in enumerate(self.instances)}
        self._row_ids = list(self.instances)
        if not self.instances:
            self._stack_cfg = np.zeros((0, 0, 0))
            self._stack_counts = np.zeros((0, 0), dtype=np.int64)
            return
        self._stack_cfg = np.stack([inst.join_configs for inst in self.instances.values()]
                                   ).astype(np.float64)
        self._stack_counts = np.stack([inst.join_counts for inst in self.instances.values()])

    def _sync_slot(self, inst: MetaInstance, slot: int):
        row = self._rows[inst.instance_id]
        self._stack_cfg[row, slot] = inst.join_configs[slot]
        self._stack_counts[row, slot] = inst.join_counts[slot]

    # -- queries ---------------------------------------------------------

    @property
    def num_running_slices(self) -> int:
        return len(self.slices)

    @property
    def num_instances(self) -> int:
        return len(self.instances)

    def occupied(self) -> np.ndarray:
        return self.capacity - self.available

    def has_room(self, footprint: np.ndarray) -> bool:
        return bool(np.all(self.available >= footprint - 1e-9))

    def instance_views(self) -> list[InstanceView]:
        return [inst.view() for inst in self.instances.values()]

    def match_request(self, functions: FunctionSet) -> SimilarityReport:
        """Similarity report of the request against all instances.

        Identical to scoring each instance view separately and taking the
        best, but vectorized over instances: one score matrix for all
        (instance, slot) pairs.
        """
        if not self.instances:
            return SimilarityReport.no_match()
        cfg, counts = self._stack_cfg, self._stack_counts
        req = functions.slots.astype(np.float64)

        dots = np.einsum("nfk,fk->nf", cfg, req)
        denom = (cfg * cfg).sum(axis=2) + (req * req).sum(axis=1)[None, :] - dots
        scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
        present = cfg.any(axis=2)
        below_cap = counts < self.share_cap
        contributing = (present & below_cap) if self.capacity_aware_similarity else present
        j = (scores * contributing).sum(axis=1) / functions.num_slots

        best = int(np.argmax(j))  # first max: lowest instance id wins ties
        if j[best] <= 0.0:
            return SimilarityReport.no_match()
        shareable = present[best] & below_cap[best] & (scores[best] > 0.0)
        return SimilarityReport(self._row_ids[best], float(j[best]),
                                frozenset(np.flatnonzero(shareable).tolist()))

    def match_request_reference(self, functions: FunctionSet) -> SimilarityReport:
        """Per-instance scoring path; kept for equivalence testing."""
        return best_match(functions, self.instance_views(), self.share_cap,
                          capacity_aware=self.capacity_aware_similarity)

    # -- mutations -------------------------------------------------------

    def place(self, slice_id: int, spec: MetaSliceSpec, report: SimilarityReport,
              footprint: np.ndarray) -> PlacementOutcome:
        """Admit a slice, sharing the report's slots of its matched instance.

        The caller must have verified capacity; violating that raises
        InsufficientResourcesError since it signals a controller bug.
        """
        if slice_id in self.slices:
            raise ValueError(f"slice id {slice_id} already running")
        if not self.has_room(footprint):
            raise InsufficientResourcesError(
                f"footprint {footprint} exceeds available {self.available}")

        created_new = report.best_instance_id is None
        if created_new:
            inst = MetaInstance(self._next_instance_id, spec.functions.num_slots,
                                spec.functions.config_bits)
            self.instances[inst.instance_id] = inst
            self._next_instance_id += 1
            self._rebuild_stack()
            shared_slots: frozenset[int] = frozenset()
        else:
            inst = self.instances[report.best_instance_id]
            shared_slots = report.shareable_slots

        slot_to_record: dict[int, int] = {}
        charged = np.zeros_like(self.capacity)
        for f in spec.required_slots().tolist():
            if f in shared_slots:
                rec = inst.joinable_record(f)
                if rec is None or rec.share_count >= self.share_cap:
                    raise RuntimeError(f"stale similarity report: slot {f} not joinable")
                rec.share_count += 1
            else:
                rec = FunctionInstanceRecord(
                    record_id=self._next_record_id, slot=f,
                    config=spec.functions.slots[f].copy(),
                    resources=spec.function_resources[f].copy(), payer=slice_id)
                self._next_record_id += 1
                inst.records[rec.record_id] = rec
                charged += rec.resources
            slot_to_record[f] = rec.record_id
            inst.refresh_slot(f)
            self._sync_slot(inst, f)

        if not np.allclose(charged, footprint, atol=1e-9):
            raise RuntimeError(f"footprint {footprint} disagrees with charges {charged}")
        inst.members[slice_id] = slot_to_record
        self.available = self.available - charged
        self.slices[slice_id] = SliceRecord(slice_id, spec.class_id, inst.instance_id,
                                            slot_to_record, charged.copy())
        self._check_basic()
        return PlacementOutcome(inst.instance_id, created_new)

    def release(self, slice_id: int) -> np.ndarray:
        """Remove a running slice; returns the resources returned to the pool."""
        if slice_id not in self.slices:
            raise UnknownSliceError(slice_id)
        rec_of = self.slices.pop(slice_id)
        inst = self.instances[rec_of.instance_id]
        del inst.members[slice_id]

        freed = np.zeros_like(self.capacity)
        for slot, record_id in rec_of.slot_to_record.items():
            rec = inst.records[record_id]
            rec.share_count -= 1
            if rec.share_count == 0:
                freed += rec.resources
                del inst.records[record_id]
            elif rec.payer == slice_id:
                # Hand the standing charge to the lowest-id surviving sharer.
                heir = min(s for s, slots in inst.members.items()
                           if slots.get(slot) == record_id)
                rec.payer = heir
                self.slices[heir].charged += rec.resources
            inst.refresh_slot(slot)

        if not inst.members:
            if inst.records:
                raise RuntimeError("instance retains records without members")
            del self.instances[rec_of.instance_id]
            self._rebuild_stack()
        else:
            for slot in rec_of.slot_to_record:
                self._sync_slot(inst, slot)
        self.available = self.available + freed
        self._check_basic()
        return freed

    # -- invariants ------------------------------------------------------

    def _check_basic(self):
        if (self.available < -1e-9).any():
            raise AssertionError("capacity exceeded: available went negative")
        if (self.available > self.capacity + 1e-9).any():
            raise AssertionError("released more than was occupied")

    def validate(self):
        """Full invariant audit; intended for tests and periodic fuzz checks."""
        self._check_basic()
        total_records = np.zeros_like(self.capacity)
        for inst in self.instances.values():
            if not inst.members:
                raise AssertionError("empty instance not deleted")
            for rec in inst.records.values():
                if not (1 <= rec.share_count <= self.share_cap):
                    raise AssertionError(f"share count {rec.share_count} outside 1..{self.share_cap}")
                users = sum(1 for slots in inst.members.values()
                            if slots.get(rec.slot) == rec.record_id)
                if users != rec.share_count:
                    raise AssertionError("share count disagrees with member usage")
                if rec.payer not in inst.members:
                    raise AssertionError("record charged to a departed slice")
                total_records += rec.resources
            for slice_id, slots in inst.members.items():
                for slot, record_id in slots.items():
                    if record_id not in inst.records:
                        raise AssertionError("member maps to a missing record")
            expect = inst.join_counts.copy()
            for f in range(inst.num_slots):
                inst.refresh_slot(f)
            if not np.array_equal(expect, inst.join_counts):
                raise AssertionError("stale per-slot join view")
        if not np.allclose(self.available + total_records, self.capacity, atol=1e-9):
            raise AssertionError("conservation violated: records vs available")
        total_charged = sum((s.charged for s in self.slices.values()),
                            start=np.zeros_like(self.capacity))
        if not np.allclose(self.available + total_charged, self.capacity, atol=1e-9):
            raise AssertionError("conservation violated: per-slice charges vs available")

    # -- export ----------------------------------------------------------

    def snapshot(self) -> dict:
        """Structured dump of live placement state for CSV/JSON export."""
        return {
            "available": self.available.tolist(),
            "capacity": self.capacity.tolist(),
            "instances": [
                {
                    "id": inst.instance_id,
                    "members": sorted(inst.members),
                    "records": [
                        {"record_id": rec.record_id, "slot": rec.slot,
                         "share_count": rec.share_count,
                         "resources": rec.resources.tolist()}
                        for rec in sorted(inst.records.values(), key=lambda r: r.record_id)
                    ],
                }
                for inst in self.instances.values()
            ],
            "slices": [
                {"id": s.slice_id, "class_id": s.class_id, "instance_id": s.instance_id,
                 "charged": s.charged.tolist()}
                for s in self.slices.values()
            ],
        }
