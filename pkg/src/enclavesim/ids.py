"""Enclave identifiers.

Identities are 4-bit values carried on every bus request and stored per core.
Three are fixed by the architecture; the remaining thirteen form the pool
handed out to enclaves at setup and reclaimed at teardown.
"""

EID_BITS = 4

EID_OS = 0x0          # permanently the rich OS / host software
EID_FIRMWARE = 0xE    # platform firmware context
EID_SM = 0xF          # security monitor, exempt from bus access control

POOL_IDS = tuple(range(0x1, 0xE))   # 13 dynamically assignable identities

_NAMES = {EID_OS: "os", EID_FIRMWARE: "fw", EID_SM: "sm"}


def is_valid_eid(eid):
    return isinstance(eid, int) and 0 <= eid <= 0xF


def is_pool_eid(eid):
    return 0x1 <= eid <= 0xD


def check_eid(eid):
    if not is_valid_eid(eid):
        raise ValueError(f"enclave id out of range: {eid!r}")
    return eid


def eid_name(eid):
    """Short human-readable name used in traces."""
    return _NAMES.get(eid, f"e{eid:x}")
