"""One small machine for the demo scripts: 2 MiB of memory, two cores, a
16x8 cache, deterministic test-double crypto. Mirrors what the scenario
runner assembles, just with the pieces exposed."""

import random
import types

from enclavesim.bus import MemRegion, MemoryArbiterConfig, SystemBus
from enclavesim.cache import CacheGeometry, PartitionedCache
from enclavesim.costs import CostModel
from enclavesim.crypto import backend
from enclavesim.ids import EID_FIRMWARE, EID_SM
from enclavesim.machine import Machine
from enclavesim.memory import SparseMemory
from enclavesim.monitor import SecurityMonitor
from enclavesim.packaging import Ecosystem
from enclavesim.trace import Meter


def build(num_cores=2, seed=7, trust_seed=0xD0D0, peripherals=(),
          record_trace=False):
    schemes = backend("double")
    rng = random.Random(seed)
    meter = Meter(CostModel(), record_trace=record_trace)
    memory = SparseMemory(2 * 1024 * 1024)
    arbiter = MemoryArbiterConfig(MemRegion.from_span(0x2000, 0x1000))
    arbiter.set_region(EID_SM, MemRegion.from_span(0, 0x2000))
    arbiter.set_region(EID_FIRMWARE, MemRegion.from_span(0x4000, 0x1000))
    cache = PartitionedCache(CacheGeometry(16, 8, 64), memory, rng, meter,
                             max_ways_per_enclave=8)
    bus = SystemBus(arbiter, cache, memory, meter, peripherals=peripherals)
    machine = Machine(num_cores, meter)
    ecosystem = Ecosystem.create(schemes[0], random.Random(trust_seed))
    monitor = SecurityMonitor(bus, cache, machine, meter, rng, schemes,
                              ecosystem, pool_base=0x100000)
    monitor.boot()
    return types.SimpleNamespace(
        schemes=schemes, meter=meter, memory=memory, arbiter=arbiter,
        cache=cache, bus=bus, machine=machine, ecosystem=ecosystem,
        monitor=monitor)
