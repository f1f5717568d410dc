"""Shared L2 cache with per-line owner identities and way partitioning.

A line hit requires both the tag and the owner identity to match. In the
strict partitioning mode an identity may additionally hit and fill only
inside ways exclusively allocated to it, so its footprint (and therefore
its evictions) can never be observed by another identity. In the basic
mode evictions may cross identities; that occupancy channel is the
documented trade-off of running without exclusive ways.

Replacement is pseudo-random from the permitted candidate ways, preferring
invalid candidates (lowest index first, no PRNG draw) so cold-start fills
are deterministic.
"""

import dataclasses

from .errors import NotSM, EnclaveSimError
from .ids import EID_SM, eid_name

MODE_BASIC = "basic"
MODE_STRICT = "strict"


class NoCandidateWay(EnclaveSimError):
    """Strict-mode identity has an empty way allocation: configuration
    invariant violation, there is nowhere to hit or fill."""


class WaysUnavailable(EnclaveSimError):
    pass


class ExceedsPerEnclaveMax(EnclaveSimError):
    pass


@dataclasses.dataclass(frozen=True)
class CacheGeometry:
    num_sets: int = 64
    num_ways: int = 16
    line_bytes: int = 64

    def __post_init__(self):
        for name in ("num_sets", "line_bytes"):
            value = getattr(self, name)
            if value <= 0 or value & (value - 1):
                raise ValueError(f"{name} must be a positive power of two")
        if self.num_ways < 1:
            raise ValueError("num_ways must be >= 1")

    def split(self, address):
        line = address // self.line_bytes
        return line % self.num_sets, line // self.num_sets

    def line_base(self, set_index, tag):
        return (tag * self.num_sets + set_index) * self.line_bytes


class CacheLine:
    __slots__ = ("valid", "tag", "eid", "dirty", "data")

    def __init__(self, line_bytes):
        self.valid = False
        self.tag = 0
        self.eid = 0
        self.dirty = False
        self.data = bytearray(line_bytes)


class PartitionedCache:
    def __init__(self, geometry, memory, rng, meter, max_ways_per_enclave=8):
        self.geometry = geometry
        self.memory = memory
        self.rng = rng
        self.meter = meter
        self.max_ways_per_enclave = max_ways_per_enclave
        self.sets = [[CacheLine(geometry.line_bytes) for _ in range(geometry.num_ways)]
                     for _ in range(geometry.num_sets)]
        self.way_owner = [None] * geometry.num_ways   # exclusivity directory
        self.modes = {}                               # eid -> mode, default basic
        self.allocated = {}                           # eid -> tuple of way indices

    # -- queries ----------------------------------------------------------

    def mode_of(self, eid):
        return self.modes.get(eid, MODE_BASIC)

    def allocated_ways(self, eid):
        return self.allocated.get(eid, ())

    def free_ways(self):
        return [w for w, owner in enumerate(self.way_owner) if owner is None]

    def resident_lines(self, eid):
        return sum(1 for ways in self.sets for line in ways
                   if line.valid and line.eid == eid)

    # -- the access path --------------------------------------------------

    def access(self, eid, address, size, op, data=b""):
        geometry = self.geometry
        offset = address % geometry.line_bytes
        if offset + size > geometry.line_bytes:
            raise ValueError("access spans a line boundary")
        set_index, tag = geometry.split(address)
        ways = self.sets[set_index]
        strict = self.mode_of(eid) == MODE_STRICT
        allowed_ways = self.allocated.get(eid, ()) if strict else None

        hit_way = -1
        for way, line in enumerate(ways):
            if line.valid and line.tag == tag and line.eid == eid:
                if strict and way not in allowed_ways:
                    continue    # resident but outside the partition: a miss
                hit_way = way
                break

        meter = self.meter
        if hit_way >= 0:
            meter.charge("l2_hit_cycles")
            meter.bump(eid, "hits")
            line = ways[hit_way]
            if op == "write":
                line.data[offset:offset + size] = data
                line.dirty = True
                return True, b""
            return True, bytes(line.data[offset:offset + size])

        meter.charge("l2_miss_cycles")
        meter.bump(eid, "misses")

        # one copy per (set, tag): write back and drop any other copy of this
        # address before refilling, whoever owns it (sanctioned sharing and
        # stale copies left behind by a mode switch both end up here)
        for way, line in enumerate(ways):
            if line.valid and line.tag == tag:
                self._drop_line(set_index, way, line, by_eid=eid, reason="alias")

        victim_way = self.select_victim(eid, set_index)
        line = ways[victim_way]
        if line.valid:
            self._drop_line(set_index, victim_way, line, by_eid=eid, reason="victim")

        base = geometry.line_base(set_index, tag)
        meter.charge("dram_cycles")
        line.data[:] = self.memory.read(base, geometry.line_bytes)
        line.valid = True
        line.tag = tag
        line.eid = eid
        line.dirty = False
        if op == "write":
            line.data[offset:offset + size] = data
            line.dirty = True
            return False, b""
        return False, bytes(line.data[offset:offset + size])

    def select_victim(self, eid, set_index):
        if self.mode_of(eid) == MODE_STRICT:
            candidates = self.allocated.get(eid, ())
            if not candidates:
                raise NoCandidateWay(f"{eid_name(eid)} is strict with no allocated ways")
        else:
            owner = self.way_owner
            candidates = [w for w in range(self.geometry.num_ways)
                          if owner[w] is None or owner[w] == eid]
        ways = self.sets[set_index]
        for way in candidates:
            if not ways[way].valid:
                return way
        return candidates[self.rng.randrange(len(candidates))]

    def _drop_line(self, set_index, way, line, by_eid, reason):
        """Write back if dirty, invalidate, record the eviction."""
        meter = self.meter
        if line.dirty:
            base = self.geometry.line_base(set_index, line.tag)
            self.memory.write(base, bytes(line.data))
            meter.charge("dram_cycles")
            meter.bump(line.eid, "writebacks")
        meter.bump(line.eid, "evictions")
        if meter.records is not None:
            meter.emit(line.eid, "evict", reason,
                       f"set={set_index};way={way};by={eid_name(by_eid)}")
        line.valid = False
        line.dirty = False

    # -- SM-only partition management -------------------------------------

    def _gate(self, caller_eid):
        if caller_eid != EID_SM:
            raise NotSM(f"cache partition surface called by {eid_name(caller_eid)}")

    def allocate_ways(self, caller_eid, eid, count):
        self._gate(caller_eid)
        if count < 1:
            raise ValueError("must allocate at least one way")
        current = self.allocated.get(eid, ())
        if len(current) + count > self.max_ways_per_enclave:
            raise ExceedsPerEnclaveMax(
                f"{len(current)}+{count} exceeds the per-enclave maximum "
                f"{self.max_ways_per_enclave}")
        free = [w for w, owner in enumerate(self.way_owner) if owner is None]
        if len(free) < count:
            raise WaysUnavailable(f"requested {count}, only {len(free)} ways free")
        chosen = free[:count]
        for way in chosen:
            for set_index, ways in enumerate(self.sets):
                line = ways[way]
                if line.valid and line.eid != eid:
                    self._drop_line(set_index, way, line, by_eid=caller_eid,
                                    reason="allocate")
            self.way_owner[way] = eid
        self.allocated[eid] = tuple(sorted(current + tuple(chosen)))
        return self.allocated[eid]

    def release_ways(self, caller_eid, eid):
        self._gate(caller_eid)
        for way, owner in enumerate(self.way_owner):
            if owner == eid:
                self.way_owner[way] = None
        self.allocated.pop(eid, None)
        # conservative: flush everything the identity still has resident
        return self._flush_matching(caller_eid, eid, None, reason="release")

    def set_mode(self, caller_eid, eid, mode):
        self._gate(caller_eid)
        if mode not in (MODE_BASIC, MODE_STRICT):
            raise ValueError(f"bad cache mode {mode!r}")
        self.modes[eid] = mode

    def flush_enclave_lines(self, caller_eid, eid, addr_range=None):
        """Write back and invalidate every line the identity owns, optionally
        restricted to lines whose address falls in addr_range (a MemRegion)."""
        self._gate(caller_eid)
        return self._flush_matching(caller_eid, eid, addr_range, reason="flush")

    def flush_range_all_owners(self, caller_eid, addr_range):
        """Handover hygiene: purge every cached copy of a region regardless
        of owner (used when memory changes hands at setup)."""
        self._gate(caller_eid)
        count = 0
        for set_index, ways in enumerate(self.sets):
            for way, line in enumerate(ways):
                if line.valid and addr_range.contains(self.geometry.line_base(set_index, line.tag)):
                    self._drop_line(set_index, way, line, by_eid=caller_eid,
                                    reason="handover")
                    count += 1
        return count

    def _flush_matching(self, caller_eid, eid, addr_range, reason):
        count = 0
        for set_index, ways in enumerate(self.sets):
            for way, line in enumerate(ways):
                if not (line.valid and line.eid == eid):
                    continue
                if addr_range is not None and not addr_range.contains(
                        self.geometry.line_base(set_index, line.tag)):
                    continue
                self._drop_line(set_index, way, line, by_eid=caller_eid, reason=reason)
                count += 1
        return count
