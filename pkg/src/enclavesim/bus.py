"""System bus with identity-tagged transactions and arbiter-side access control.

Every parent request (core or DMA device) carries a 4-bit identity. The
memory arbiter holds one base+mask region register per assignable identity
plus registers for the monitor and firmware contexts; peripheral arbiters
hold a per-identity read/write permission bitmap, and each DMA-capable
device has a single allowed-region register. Violating transactions are
not faulted: they are redirected to an unused all-zero sink region, reads
return zeros, writes are discarded, and a violation record is queued for
the security monitor.
"""

import dataclasses

from .errors import NotSM, UnmappedAddress, DeviceUnbound
from .ids import EID_OS, EID_FIRMWARE, EID_SM, is_pool_eid, check_eid, eid_name

ALLOWED = "allowed"
REDIRECTED = "redirected"

WINDOW_ENCLAVE = "enclave"
WINDOW_OS = "os"

_MASK32 = 0xFFFFFFFF


def round_up_pow2(value):
    if value <= 0:
        raise ValueError("size must be positive")
    return 1 << (value - 1).bit_length()


@dataclasses.dataclass(frozen=True, slots=True)
class MemRegion:
    """Power-of-two sized, size-aligned address window; membership is
    ((address & mask) == base)."""
    base: int
    mask: int

    def __post_init__(self):
        size = (~self.mask & _MASK32) + 1
        if size & (size - 1):
            raise ValueError(f"mask {self.mask:#x} does not select a power-of-two window")
        if self.base & ~self.mask & _MASK32:
            raise ValueError("base has nonzero bits below the mask")
        if self.base & ~_MASK32:
            raise ValueError("base exceeds 32 bits")

    @classmethod
    def from_span(cls, base, size):
        """Region covering [base, base+size); size is rounded up to a power
        of two and base must be aligned to the rounded size."""
        rounded = round_up_pow2(size)
        return cls(base, ~(rounded - 1) & _MASK32)

    @property
    def size(self):
        return (~self.mask & _MASK32) + 1

    @property
    def end(self):
        return self.base + self.size

    def contains(self, address):
        return (address & self.mask) == self.base

    def contains_range(self, address, size):
        return self.contains(address) and self.contains(address + size - 1)

    def overlaps(self, other):
        return self.base < other.end and other.base < self.end


@dataclasses.dataclass(slots=True)
class BusTransaction:
    """One parent-to-child request. Responses carry no identity, so there is
    no response type; route() hands data back directly."""
    eid: int
    op: str                 # "read" | "write"
    address: int
    size_bytes: int
    data: bytes = b""
    origin: tuple = ("core", 0)     # ("core", index) | ("dma", device name)
    channel: str = ""               # request channel tag; responses have none

    def __post_init__(self):
        check_eid(self.eid)
        if self.size_bytes not in (1, 2, 4, 8, 16, 32, 64):
            raise ValueError(f"transaction size {self.size_bytes} not a power of two <= 64")
        if self.address % self.size_bytes:
            raise ValueError("transactions are naturally aligned bursts")
        if self.op == "write" and len(self.data) != self.size_bytes:
            raise ValueError("write data length must equal size_bytes")
        if self.op not in ("read", "write"):
            raise ValueError(f"bad op {self.op!r}")
        if not self.channel:
            # cores issue on the request channel, caching DMA parents on the
            # data channel; both carry the identity tag
            self.channel = "A" if self.origin[0] == "core" else "C"


@dataclasses.dataclass(slots=True)
class ViolationRecord:
    eid: int
    origin: tuple
    address: int
    op: str
    space: str              # "mem" | "mmio" | "dma"

    def describe(self):
        origin = f"{self.origin[0]}{self.origin[1]}" if self.origin[0] == "core" \
            else f"dma:{self.origin[1]}"
        return (f"eid={eid_name(self.eid)};origin={origin};"
                f"addr={self.address:#x};op={self.op};space={self.space}")


@dataclasses.dataclass(slots=True)
class AccessDecision:
    verdict: str
    effective_address: int
    violation: object = None


@dataclasses.dataclass(slots=True)
class SharedWindow:
    """Communication window at the top of an enclave region. The arbiter
    tracks who currently owns it; ownership toggles on handoff."""
    enclave_eid: int
    region: MemRegion
    owner: str = WINDOW_ENCLAVE     # WINDOW_ENCLAVE | WINDOW_OS


class MemoryArbiterConfig:
    """Region registers for the 13 pool identities plus monitor and firmware,
    the zero sink region, and the shared-window ownership entries."""

    def __init__(self, zero_region):
        self.regions = {}           # eid -> MemRegion
        self.zero_region = zero_region
        self.windows = {}           # enclave eid -> SharedWindow
        self._granularity = zero_region.size

    def _recompute_granularity(self):
        sizes = [self.zero_region.size]
        sizes += [r.size for r in self.regions.values()]
        sizes += [w.region.size for w in self.windows.values()]
        self._granularity = min(sizes)

    def _check_disjoint(self, region, ignore_eid=None):
        if region.overlaps(self.zero_region):
            raise ValueError("region overlaps the zero sink")
        for eid, existing in self.regions.items():
            if eid != ignore_eid and region.overlaps(existing):
                raise ValueError(f"region overlaps eid {eid:#x}")

    def set_region(self, eid, region):
        check_eid(eid)
        if eid == EID_OS:
            raise ValueError("the OS has no region register; it owns the complement")
        self._check_disjoint(region, ignore_eid=eid)
        self.regions[eid] = region
        self._recompute_granularity()

    def clear_region(self, eid):
        self.regions.pop(eid, None)
        self.windows.pop(eid, None)
        self._recompute_granularity()

    def set_window(self, eid, region, owner=WINDOW_ENCLAVE):
        if eid not in self.regions or not self.regions[eid].contains_range(region.base, region.size):
            raise ValueError("shared window must sit inside the enclave's region")
        self.windows[eid] = SharedWindow(eid, region, owner)
        self._recompute_granularity()

    def window_owner(self, eid):
        window = self.windows.get(eid)
        return window.owner if window else None

    def set_window_owner(self, eid, owner):
        if owner not in (WINDOW_ENCLAVE, WINDOW_OS):
            raise ValueError(f"bad window owner {owner!r}")
        self.windows[eid].owner = owner

    # -- the decision ----------------------------------------------------

    def _block_allowed(self, eid, address):
        """Verdict for one granularity-sized block. Every configured window,
        region and the sink are at least a block wide and block-aligned, so
        the verdict is constant within a block."""
        for window in self.windows.values():
            if window.region.contains(address):
                if window.owner == WINDOW_ENCLAVE:
                    return eid == window.enclave_eid
                return eid == EID_OS

        if self.zero_region.contains(address):
            return False    # sink is addressable by nobody below the SM

        if eid == EID_FIRMWARE:
            own = self.regions.get(EID_FIRMWARE)
            if own is not None and own.contains(address):
                return True
            return self._is_os_space(address)

        if eid == EID_OS:
            return self._is_os_space(address)

        region = self.regions.get(eid)
        return region is not None and region.contains(address)

    def _is_os_space(self, address):
        for region in self.regions.values():
            if region.contains(address):
                return False
        return True


def check_memory_access(txn, cfg):
    """Arbiter verdict for a main-memory transaction. Computed in the same
    bus step as transport; no extra latency on either verdict."""
    if txn.eid == EID_SM:
        return AccessDecision(ALLOWED, txn.address)

    gran = cfg._granularity
    allowed = True
    if txn.size_bytes <= gran:
        allowed = cfg._block_allowed(txn.eid, txn.address)
    else:
        for offset in range(0, txn.size_bytes, gran):
            if not cfg._block_allowed(txn.eid, txn.address + offset):
                allowed = False
                break

    if allowed:
        return AccessDecision(ALLOWED, txn.address)
    effective = cfg.zero_region.base + (txn.address & ~cfg.zero_region.mask & _MASK32)
    violation = ViolationRecord(txn.eid, txn.origin, txn.address, txn.op, "mem")
    return AccessDecision(REDIRECTED, effective, violation)


@dataclasses.dataclass
class PeripheralDescriptor:
    name: str
    mmio: MemRegion
    perm_bitmap: int = 0            # two bits per eid: read = 2*eid, write = 2*eid+1
    dma_capable: bool = False
    dma_allowed: MemRegion = None   # None: unbound, deny-all DMA
    bound_eid: int = None
    internal_memory: bytearray = None

    def __post_init__(self):
        if self.internal_memory is None:
            self.internal_memory = bytearray(self.mmio.size)


def perm_bits(eid, read=False, write=False):
    """Build a permission bitmap fragment for one identity."""
    bits = 0
    if read:
        bits |= 1 << (2 * eid)
    if write:
        bits |= 1 << (2 * eid + 1)
    return bits


def check_peripheral_access(txn, peripheral):
    if txn.eid == EID_SM:
        return AccessDecision(ALLOWED, txn.address)
    bit = 2 * txn.eid + (1 if txn.op == "write" else 0)
    if (peripheral.perm_bitmap >> bit) & 1:
        return AccessDecision(ALLOWED, txn.address)
    violation = ViolationRecord(txn.eid, txn.origin, txn.address, txn.op, "mmio")
    return AccessDecision(REDIRECTED, txn.address, violation)


def check_dma_access(device, txn, zero_region):
    """Region-based filter at the device's bus port. No identity logic here;
    an unbound device simply has no allowed region (deny-all)."""
    allowed_region = device.dma_allowed
    if allowed_region is not None and allowed_region.contains_range(txn.address, txn.size_bytes):
        return AccessDecision(ALLOWED, txn.address)
    violation = ViolationRecord(txn.eid, txn.origin, txn.address, txn.op, "dma")
    effective = zero_region.base + (txn.address & ~zero_region.mask & _MASK32)
    return AccessDecision(REDIRECTED, effective, violation)


class SystemBus:
    """Routes transactions to main memory (through the shared L2) or to
    peripheral MMIO, applying the arbiter checks on the way.

    disable_memory_filter / disable_dma_filter exist solely so attack
    scenarios can run their negative controls (defense off must leak);
    they are never set in normal operation.
    """

    def __init__(self, arbiter, cache, memory, meter, peripherals=(),
                 disable_memory_filter=False, disable_dma_filter=False):
        self.arbiter = arbiter
        self.cache = cache
        self.memory = memory
        self.meter = meter
        self.peripherals = {p.name: p for p in peripherals}
        self.disable_memory_filter = disable_memory_filter
        self.disable_dma_filter = disable_dma_filter

    def add_peripheral(self, peripheral):
        if peripheral.name in self.peripherals:
            raise ValueError(f"duplicate peripheral {peripheral.name}")
        self.peripherals[peripheral.name] = peripheral

    # -- SM-only configuration surface (MMIO control window analogue) ----

    def _gate(self, caller_eid):
        if caller_eid != EID_SM:
            raise NotSM(f"bus configuration attempted by {eid_name(caller_eid)}")

    def program_region(self, caller_eid, eid, region):
        self._gate(caller_eid)
        self.arbiter.set_region(eid, region)

    def clear_region(self, caller_eid, eid):
        self._gate(caller_eid)
        self.arbiter.clear_region(eid)

    def program_window(self, caller_eid, eid, region, owner=WINDOW_ENCLAVE):
        self._gate(caller_eid)
        self.arbiter.set_window(eid, region, owner)

    def set_window_owner(self, caller_eid, eid, owner):
        self._gate(caller_eid)
        self.arbiter.set_window_owner(eid, owner)

    def set_peripheral_perms(self, caller_eid, name, perm_bitmap):
        self._gate(caller_eid)
        self.peripherals[name].perm_bitmap = perm_bitmap

    def bind_dma(self, caller_eid, name, region, eid):
        self._gate(caller_eid)
        device = self.peripherals[name]
        if not device.dma_capable:
            raise DeviceUnbound(f"{name} has no DMA port")
        device.dma_allowed = region
        device.bound_eid = eid

    def sanitize_peripheral(self, caller_eid, name):
        """Zero device-internal memory and drop any DMA binding; required
        before a device is handed to a new owner."""
        self._gate(caller_eid)
        device = self.peripherals[name]
        device.internal_memory[:] = bytes(len(device.internal_memory))
        device.dma_allowed = None
        device.bound_eid = None
        if self.meter.records is not None:
            self.meter.emit(EID_SM, "sanitize", "ok", f"device={name}")
        return device

    # -- routing ----------------------------------------------------------

    def route(self, txn):
        """Returns (verdict, data, hit) where data is the read payload
        (b"" for writes) and hit is True/False for cached memory accesses,
        None otherwise."""
        meter = self.meter
        meter.charge("bus_txn_cycles")

        in_memory = self.memory.check_range(txn.address, txn.size_bytes)
        if txn.origin[0] == "dma":
            if not in_memory:
                raise UnmappedAddress(f"DMA target {txn.address:#x} outside main memory")
            device = self.peripherals[txn.origin[1]]
            if self.disable_dma_filter:
                decision = AccessDecision(ALLOWED, txn.address)
            else:
                decision = check_dma_access(device, txn, self.arbiter.zero_region)
            return self._finish_memory(txn, decision, "mem")

        if in_memory:
            if self.disable_memory_filter:
                decision = AccessDecision(ALLOWED, txn.address)
            else:
                decision = check_memory_access(txn, self.arbiter)
            return self._finish_memory(txn, decision, "mem")

        for device in self.peripherals.values():
            if device.mmio.contains(txn.address):
                if not device.mmio.contains_range(txn.address, txn.size_bytes):
                    raise UnmappedAddress(f"burst escapes MMIO window of {device.name}")
                return self._finish_mmio(txn, device)

        raise UnmappedAddress(f"{txn.address:#x} is neither memory nor MMIO")

    def _finish_memory(self, txn, decision, space):
        meter = self.meter
        if decision.verdict == ALLOWED:
            hit, data = self.cache.access(txn.eid, txn.address, txn.size_bytes,
                                          txn.op, txn.data)
            if meter.records is not None:
                meter.emit(txn.eid, "txn",
                           ALLOWED,
                           f"op={txn.op};addr={txn.address:#x};size={txn.size_bytes};"
                           f"dest=mem;hit={int(hit)}")
            return ALLOWED, data, hit
        meter.queue_violation(decision.violation)
        if meter.records is not None:
            meter.emit(txn.eid, "txn", REDIRECTED,
                       f"op={txn.op};addr={txn.address:#x};size={txn.size_bytes};"
                       f"dest=zero")
        data = bytes(txn.size_bytes) if txn.op == "read" else b""
        return REDIRECTED, data, None

    def _finish_mmio(self, txn, device):
        meter = self.meter
        decision = check_peripheral_access(txn, device)
        offset = txn.address - device.mmio.base
        if decision.verdict == ALLOWED:
            if txn.op == "write":
                device.internal_memory[offset:offset + txn.size_bytes] = txn.data
                data = b""
            else:
                data = bytes(device.internal_memory[offset:offset + txn.size_bytes])
        else:
            meter.queue_violation(decision.violation)
            data = bytes(txn.size_bytes) if txn.op == "read" else b""
        if meter.records is not None:
            meter.emit(txn.eid, "txn", decision.verdict,
                       f"op={txn.op};addr={txn.address:#x};size={txn.size_bytes};"
                       f"dest=mmio:{device.name}")
        return decision.verdict, data, None
