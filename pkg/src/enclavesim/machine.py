"""Cores, the gated identity register, traps, and switch-time flushes.

Each core carries an execution-identity register that tags every bus request
the core issues. The register is hardware-gated: it only accepts writes while
the core is already running monitor code. Everything else (interrupt
deferral, per-enclave trap delegation, SMT policy) hangs off the same core
records.

Cost discipline for a full context switch, in order:
  1. entry into the monitor flushes the core-private L1,
  2. monitor work is free (bookkeeping, not modeled timing),
  3. exit from the monitor flushes the TLB, then rewrites the identity
     register through the gate.
"""

import dataclasses

from .errors import NotSM
from .ids import EID_SM, EID_OS, is_valid_eid, is_pool_eid, eid_name

TRAP_CLASSES = ("syscall", "page_fault", "illegal_instruction",
                "external_interrupt", "timer_interrupt")


@dataclasses.dataclass
class Core:
    core_id: int
    eid: int = EID_SM           # boot identity; monitor hands off to the OS
    prev_eid: int = EID_OS      # identity before the last monitor entry
    smt_enabled: bool = True
    trap_vector: int = 0
    pending_interrupts: list = dataclasses.field(default_factory=list)


class Machine:
    """Core complex. Owns identity gating and switch flush accounting."""

    def __init__(self, num_cores, meter):
        if num_cores < 1:
            raise ValueError("need at least one core")
        self.cores = [Core(core_id=i) for i in range(num_cores)]
        self.meter = meter
        # eid -> frozenset of trap classes that must enter the monitor
        self.delegation = {}

    def core(self, core_id):
        return self.cores[core_id]

    # -- identity register ---------------------------------------------------

    def write_eid_register(self, core_id, value):
        """Raw write attempt. Silently dropped (and recorded) unless the
        core is currently in monitor context."""
        core = self.cores[core_id]
        if not is_valid_eid(value):
            raise ValueError(f"bad eid {value:#x}")
        if core.eid != EID_SM:
            self.meter.bump(core.eid, "gate_violations")
            self.meter.emit(core.eid, "gate", "denied",
                            f"core{core_id} tried eid:={eid_name(value)}")
            return False
        core.eid = value
        return True

    # -- monitor entry / exit ------------------------------------------------

    def enter_monitor(self, core_id, reason=""):
        core = self.cores[core_id]
        if core.eid == EID_SM:
            raise NotSM(f"core{core_id} is already in monitor context")
        core.prev_eid = core.eid
        self.flush_l1(core_id, reason or "monitor entry")
        core.eid = EID_SM

    def exit_monitor(self, core_id, target_eid):
        core = self.cores[core_id]
        if core.eid != EID_SM:
            raise NotSM(f"core{core_id} is not in monitor context")
        if not is_valid_eid(target_eid) or target_eid == EID_SM:
            raise ValueError(f"bad switch target {target_eid:#x}")
        self.flush_tlb(core_id, "monitor exit")
        # SMT policy: never share a physical core with an enclave
        if is_pool_eid(target_eid):
            core.smt_enabled = False
        elif target_eid == EID_OS:
            core.smt_enabled = True
        ok = self.write_eid_register(core_id, target_eid)
        assert ok     # gate cannot refuse: we checked monitor context above
        return self._drain_deferred(core_id)

    def context_switch(self, core_id, target_eid, reason=""):
        """Full switch: enter the monitor, then leave it as target_eid."""
        self.enter_monitor(core_id, reason or f"switch to {eid_name(target_eid)}")
        return self.exit_monitor(core_id, target_eid)

    # -- flushes ---------------------------------------------------------------

    def flush_l1(self, core_id, why=""):
        self.meter.charge("l1_flush_cycles")
        self.meter.bump(self.cores[core_id].eid, "l1_flushes")
        self.meter.emit(self.cores[core_id].eid, "flush", "l1",
                        f"core{core_id} {why}".rstrip())

    def flush_tlb(self, core_id, why=""):
        self.meter.charge("tlb_flush_cycles")
        self.meter.bump(self.cores[core_id].eid, "tlb_flushes")
        self.meter.emit(self.cores[core_id].eid, "flush", "tlb",
                        f"core{core_id} {why}".rstrip())

    # -- traps and interrupts --------------------------------------------------

    def set_trap_vector(self, core_id, address):
        core = self.cores[core_id]
        if core.eid != EID_SM:
            raise NotSM("trap vector is monitor-managed")
        core.trap_vector = address

    def set_delegation(self, eid, classes):
        bad = set(classes) - set(TRAP_CLASSES)
        if bad:
            raise ValueError(f"unknown trap classes {sorted(bad)}")
        self.delegation[eid] = frozenset(classes)

    def clear_delegation(self, eid):
        self.delegation.pop(eid, None)

    def trap_route(self, core_id, trap_class):
        """Where does this trap land: 'monitor' or 'local'?"""
        if trap_class not in TRAP_CLASSES:
            raise ValueError(f"unknown trap class {trap_class!r}")
        core = self.cores[core_id]
        return ("monitor"
                if trap_class in self.delegation.get(core.eid, frozenset())
                else "local")

    def raise_interrupt(self, core_id, kind, payload=None):
        """Returns 'deferred' while the core runs monitor code, else
        'delivered'. Deferred interrupts replay in order at monitor exit."""
        core = self.cores[core_id]
        if core.eid == EID_SM:
            core.pending_interrupts.append((kind, payload))
            self.meter.emit(EID_SM, "interrupt", "deferred",
                            f"core{core_id} {kind}")
            return "deferred"
        return "delivered"

    def _drain_deferred(self, core_id):
        core = self.cores[core_id]
        drained = list(core.pending_interrupts)
        core.pending_interrupts.clear()
        return drained

    # -- state queries -----------------------------------------------------------

    def cores_running(self, eid):
        return [c.core_id for c in self.cores if c.eid == eid]

    def snapshot(self):
        return [(c.core_id, eid_name(c.eid), c.smt_enabled) for c in self.cores]
