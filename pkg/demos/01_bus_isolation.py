"""Walk the bus-level isolation story on a tiny machine.

Every transaction carries a hardware identity tag. The arbiter in front of
memory either lets a transaction through or silently redirects it to the
zero sink and queues a violation record for the monitor. Nothing below the
monitor can even address the sink itself.
"""

import random

from enclavesim.bus import (BusTransaction, MemRegion, MemoryArbiterConfig,
                            SystemBus)
from enclavesim.cache import CacheGeometry, PartitionedCache
from enclavesim.costs import CostModel
from enclavesim.ids import EID_OS, EID_SM
from enclavesim.memory import SparseMemory
from enclavesim.trace import Meter

meter = Meter(CostModel(), record_trace=False)
memory = SparseMemory(1 << 20)
arbiter = MemoryArbiterConfig(MemRegion.from_span(0x2000, 0x1000))
cache = PartitionedCache(CacheGeometry(16, 8, 64), memory,
                         random.Random(1), meter)
bus = SystemBus(arbiter, cache, memory, meter)

ENCLAVE = 0x1
arbiter.set_region(ENCLAVE, MemRegion.from_span(0x10000, 0x10000))
print("machine: 1 MiB memory, zero sink at 0x2000, "
      "enclave region 0x10000..0x20000\n")

secret = b"8 bytes!"
verdict, _, _ = bus.route(BusTransaction(ENCLAVE, "write", 0x10100, 8, secret))
print(f"enclave writes its secret at 0x10100       -> {verdict}")

verdict, data, _ = bus.route(BusTransaction(ENCLAVE, "read", 0x10100, 8))
print(f"enclave reads it back                      -> {verdict}, {data!r}")

verdict, data, _ = bus.route(BusTransaction(EID_OS, "read", 0x10100, 8))
print(f"OS reads the same address                  -> {verdict}, {data!r}")

verdict, _, _ = bus.route(BusTransaction(EID_OS, "write", 0x10100, 8,
                                         b"overwrit"))
print(f"OS tries to overwrite it                   -> {verdict}")

verdict, data, _ = bus.route(BusTransaction(ENCLAVE, "read", 0x10100, 8))
assert data == secret
print(f"enclave reads again, secret intact         -> {verdict}, {data!r}")

# the sink is not a mailbox either: reads of it are refused below the monitor
verdict, _, _ = bus.route(BusTransaction(EID_OS, "read", 0x2000, 8))
print(f"OS reads the zero sink itself              -> {verdict}")

verdict, data, _ = bus.route(BusTransaction(EID_SM, "read", 0x10100, 8))
print(f"the monitor reads the enclave address      -> {verdict}, {data!r}")

print(f"\n{len(meter.pending_violations)} violations queued for the monitor:")
for record in meter.pending_violations:
    print("  " + record.describe())
