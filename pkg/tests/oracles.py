"""Independent reference models used by the test suite.

Everything in here is deliberately written from the access-control rules
as prose, not by importing or mirroring the simulator's code: decisions are
computed over explicit address-range lists, memory is a flat byte store with
no cache in front of it. When the simulator and these models disagree, the
simulator is wrong until proven otherwise.
"""

OS_ID = 0x0
FW_ID = 0xE
SM_ID = 0xF

ALLOWED = "allowed"
REDIRECTED = "redirected"


class RangeMap:
    """Owner lookup over explicit [start, end) ranges. No masks, no tricks."""

    def __init__(self):
        self.ranges = []  # (start, end, owner_key)

    def add(self, start, length, owner_key):
        self.ranges.append((start, start + length, owner_key))

    def owner_at(self, address):
        for start, end, owner_key in self.ranges:
            if start <= address < end:
                return owner_key
        return None


def decide(eid, address, region_map, zero_start, zero_len, windows=()):
    """Reference access-control verdict for one main-memory address.

    region_map: RangeMap whose owner keys are eids (pool ids, SM_ID, FW_ID).
    windows: iterable of (start, len, enclave_eid, owner) where owner is
        "enclave" or "os"; windows sit inside the enclave's region and take
        precedence over it.
    Returns ALLOWED or REDIRECTED.
    """
    if eid == SM_ID:
        return ALLOWED

    for w_start, w_len, w_eid, w_owner in windows:
        if w_start <= address < w_start + w_len:
            if w_owner == "enclave" and eid == w_eid:
                return ALLOWED
            if w_owner == "os" and eid == OS_ID:
                return ALLOWED
            return REDIRECTED

    in_zero = zero_start <= address < zero_start + zero_len
    owner = region_map.owner_at(address)

    if eid == FW_ID:
        # firmware touches its own region and anything belonging to the OS
        if owner == FW_ID:
            return ALLOWED
        if owner is None and not in_zero:
            return ALLOWED
        return REDIRECTED

    if eid == OS_ID:
        if owner is None and not in_zero:
            return ALLOWED
        return REDIRECTED

    # dynamic pool id: only its own configured region
    if owner == eid:
        return ALLOWED
    return REDIRECTED


def decide_dma(address, allowed_start, allowed_len):
    """Reference DMA-port verdict. Unbound devices pass allowed_len=0."""
    if allowed_len and allowed_start <= address < allowed_start + allowed_len:
        return ALLOWED
    return REDIRECTED


def decide_peripheral(eid, op, perm_bitmap):
    if eid == SM_ID:
        return ALLOWED
    bit = 2 * eid + (1 if op == "write" else 0)
    if (perm_bitmap >> bit) & 1:
        return ALLOWED
    return REDIRECTED


class FlatMemory:
    """Byte-accurate replay store: the world as it should look if the
    simulator's cache hierarchy and redirect plumbing are correct."""

    def __init__(self):
        self.store = {}  # address -> (value_byte, writer_eid)

    def write(self, address, data, writer_eid):
        for i, b in enumerate(data):
            self.store[address + i] = (b, writer_eid)

    def read(self, address, size):
        return bytes(self.store.get(address + i, (0, None))[0] for i in range(size))

    def writer_of(self, address):
        return self.store.get(address, (0, None))[1]
