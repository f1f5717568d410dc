"""Shared builders for the test suite.

Tests that need the full machine get one from build_stack(); it is small
(2 MiB, tiny cache) so property runs stay fast. Crypto always uses the
deterministic test doubles except where a test opts into the real backend.
"""

import random
import types

import pytest

from enclavesim.bus import MemRegion, MemoryArbiterConfig, SystemBus
from enclavesim.cache import CacheGeometry, PartitionedCache
from enclavesim.costs import CostModel
from enclavesim.crypto import backend
from enclavesim.ids import EID_FIRMWARE, EID_SM
from enclavesim.machine import Machine
from enclavesim.memory import SparseMemory
from enclavesim.monitor import SecurityMonitor
from enclavesim.packaging import Ecosystem, quick_package
from enclavesim.trace import Meter

ZERO_BASE = 0x2000
ZERO_BYTES = 0x1000
FW_BASE = 0x4000
FW_BYTES = 0x1000
POOL_BASE = 0x100000


def build_stack(num_cores=2, memory_bytes=2 * 1024 * 1024,
                geometry=None, max_ways_per_enclave=8, record_trace=True,
                peripherals=(), seed=99, trust_seed=0x5EED, nvm=None,
                skip_pt_verification=False):
    """A complete machine: memory, arbiter, cache, bus, cores, monitor."""
    schemes = backend("double")
    rng = random.Random(seed)
    meter = Meter(CostModel(), record_trace=record_trace)
    memory = SparseMemory(memory_bytes)
    arbiter = MemoryArbiterConfig(MemRegion.from_span(ZERO_BASE, ZERO_BYTES))
    arbiter.set_region(EID_SM, MemRegion.from_span(0, 0x2000))
    arbiter.set_region(EID_FIRMWARE, MemRegion.from_span(FW_BASE, FW_BYTES))
    cache = PartitionedCache(geometry or CacheGeometry(16, 8, 64),
                             memory, rng, meter,
                             max_ways_per_enclave=max_ways_per_enclave)
    bus = SystemBus(arbiter, cache, memory, meter, peripherals=peripherals)
    machine = Machine(num_cores, meter)
    ecosystem = Ecosystem.create(schemes[0], random.Random(trust_seed))
    monitor = SecurityMonitor(bus, cache, machine, meter, rng, schemes,
                              ecosystem, nvm=nvm, pool_base=POOL_BASE,
                              skip_pt_verification=skip_pt_verification)
    monitor.boot()
    return types.SimpleNamespace(
        schemes=schemes, rng=rng, meter=meter, memory=memory,
        arbiter=arbiter, cache=cache, bus=bus, machine=machine,
        ecosystem=ecosystem, monitor=monitor)


def install_and_setup(stack, label, core_id=0, **package_kw):
    """Package, install and bring one enclave live; returns (eid, config)."""
    package_kw.setdefault("memory_bytes", 64 * 1024)
    pkg, config, binary = quick_package(
        stack.schemes[0], stack.ecosystem, label, **package_kw)
    stack.monitor.install(pkg)
    eid = stack.monitor.setup(config.label, binary, config, core_id=core_id)
    return eid, config


@pytest.fixture
def stack():
    return build_stack()
