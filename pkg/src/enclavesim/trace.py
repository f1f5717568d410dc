"""Execution trace and cycle/stat accounting shared by all hardware models.

One Meter is owned by each simulation instance. Every observable effect
(bus transaction, cache fill, flush, register write, violation) goes
through it, so the trace is a complete, ordered record and the cycle
count is by construction the sum of per-event costs.
"""

import dataclasses

from .ids import eid_name

TRACE_HEADER = "# step\tcycle\teid\tkind\toutcome\tnotes"


@dataclasses.dataclass
class TraceRecord:
    step: int
    cycle: int
    eid: int
    kind: str
    outcome: str
    notes: str = ""

    def render(self):
        return (f"{self.step}\t{self.cycle}\t{eid_name(self.eid)}\t"
                f"{self.kind}\t{self.outcome}\t{self.notes}")


class Meter:
    def __init__(self, cost_model, record_trace=True):
        self.cost_model = cost_model
        self.cycles = 0
        self.ledger = {}            # cost-kind -> unit count
        self.records = [] if record_trace else None
        self._step = 0
        self.pending_violations = []
        self.stats = {}             # eid -> counter dict

    # -- cycles ---------------------------------------------------------

    def charge(self, kind, units=1):
        cost = getattr(self.cost_model, kind)
        self.ledger[kind] = self.ledger.get(kind, 0) + units
        self.cycles += cost * units
        return cost * units

    def replay_total(self, cost_model):
        """Recompute the total under a different cost model from the ledger."""
        return sum(getattr(cost_model, kind) * units
                   for kind, units in self.ledger.items())

    # -- trace ----------------------------------------------------------

    def emit(self, eid, kind, outcome, notes=""):
        if self.records is None:
            return None
        record = TraceRecord(self._step, self.cycles, eid, kind, outcome, notes)
        self._step += 1
        self.records.append(record)
        return record

    def render_trace(self):
        lines = [TRACE_HEADER]
        if self.records:
            lines.extend(r.render() for r in self.records)
        return "\n".join(lines) + "\n"

    # -- stats ----------------------------------------------------------

    def bump(self, eid, counter, amount=1):
        per = self.stats.setdefault(eid, {})
        per[counter] = per.get(counter, 0) + amount

    def stat(self, eid, counter):
        return self.stats.get(eid, {}).get(counter, 0)

    # -- violations -----------------------------------------------------

    def queue_violation(self, violation):
        self.pending_violations.append(violation)
        self.bump(violation.eid, "violations")

    def drain_violations(self):
        drained = self.pending_violations
        self.pending_violations = []
        return drained
