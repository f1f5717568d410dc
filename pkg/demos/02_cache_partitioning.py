"""Show way partitioning keeping a noisy neighbor out of a victim's ways.

In basic mode everyone competes for the same ways and a busy co-tenant
evicts the victim's working set. Give the victim exclusive ways and flip it
to strict mode, and the same co-tenant pressure stops causing victim misses.
"""

import random

from enclavesim.cache import (MODE_STRICT, CacheGeometry, PartitionedCache)
from enclavesim.costs import CostModel
from enclavesim.ids import EID_SM
from enclavesim.memory import SparseMemory
from enclavesim.trace import Meter

VICTIM, NEIGHBOR = 0x1, 0x2
geometry = CacheGeometry(num_sets=16, num_ways=8, line_bytes=64)


def pressure_run(partitioned):
    meter = Meter(CostModel(), record_trace=False)
    cache = PartitionedCache(geometry, SparseMemory(1 << 22),
                             random.Random(7), meter,
                             max_ways_per_enclave=8)
    if partitioned:
        cache.allocate_ways(EID_SM, VICTIM, 4)
        cache.set_mode(EID_SM, VICTIM, MODE_STRICT)

    working_set = [set_index * 64 + way * (64 * 16)
                   for set_index in range(16) for way in range(4)]
    for address in working_set:            # victim warms its 64 lines
        cache.access(VICTIM, address, 8, "read")

    # neighbor thrashes from the high half of memory so the two working
    # sets never alias on actual addresses, only on cache sets
    rng = random.Random(99)
    for _ in range(4000):
        cache.access(NEIGHBOR, rng.randrange(1 << 21, 1 << 22, 64), 8, "read")

    before = meter.stat(VICTIM, "misses")
    for address in working_set:             # victim touches its set again
        cache.access(VICTIM, address, 8, "read")
    return meter.stat(VICTIM, "misses") - before, cache


for partitioned in (False, True):
    misses, cache = pressure_run(partitioned)
    label = "strict, 4 exclusive ways" if partitioned else "basic, shared ways"
    print(f"victim re-reads 64 lines after neighbor pressure "
          f"[{label}]: {misses} misses")
    if partitioned:
        assert misses == 0
        ways = cache.allocated_ways(VICTIM)
        lines = cache.resident_lines(VICTIM)
        print(f"  victim owns ways {ways}, {lines} lines resident, "
              f"all inside its allocation")
