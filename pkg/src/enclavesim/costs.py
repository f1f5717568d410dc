"""Cycle cost model.

Flush constants default to values measured on the reference hardware
(TLB flush 28 cycles, L1 flush 3141 cycles). The remaining entries are
model parameters with round-number defaults; all are overridable from
scenario files or ENCLAVESIM_COST_* environment variables.
"""

import dataclasses
import os

ENV_PREFIX = "ENCLAVESIM_COST_"


@dataclasses.dataclass
class CostModel:
    tlb_flush_cycles: int = 28
    l1_flush_cycles: int = 3141
    bus_txn_cycles: int = 1
    l2_hit_cycles: int = 10
    l2_miss_cycles: int = 30
    dram_cycles: int = 100

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"cost {field.name} must be a non-negative integer")

    @classmethod
    def unit(cls):
        """All costs 1; used to replay-check cycle accounting."""
        return cls(1, 1, 1, 1, 1, 1)

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def with_env_overrides(self, environ=None):
        """Apply ENCLAVESIM_COST_<FIELD> overrides, e.g.
        ENCLAVESIM_COST_L1_FLUSH_CYCLES=4000."""
        environ = os.environ if environ is None else environ
        values = dataclasses.asdict(self)
        for name in values:
            raw = environ.get(ENV_PREFIX + name.upper())
            if raw is not None:
                values[name] = int(raw)
        return CostModel(**values)
