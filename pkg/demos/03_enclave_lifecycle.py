"""One enclave, cradle to grave, twice.

install verifies the signed package and parks it. setup claims the lowest
free identity, carves a region, loads and re-verifies the image, programs
the bus and cache, and restores sealed state. teardown seals, scrubs and
releases everything. The second generation reuses the same identity and the
rollback counter keeps counting.
"""

from enclavesim.costs import CostModel
from enclavesim.ids import EID_OS, eid_name
from enclavesim.packaging import quick_package

import demo_stack

stack = demo_stack.build()
pkg, config, binary = quick_package(stack.schemes[0], stack.ecosystem,
                                    "payroll", memory_bytes=64 * 1024)

stack.monitor.install(pkg)
meta = stack.monitor.installed[config.label]
print(f"installed 'payroll' v{config.version}, "
      f"package of {len(pkg)} bytes, signature checked")

for generation in (1, 2):
    eid = stack.monitor.setup(config.label, binary, config)
    region = stack.arbiter.regions[eid]
    print(f"\ngeneration {generation}: live as {eid_name(eid)}, "
          f"region 0x{region.base:x}..0x{region.end:x}")

    model = CostModel()
    before = stack.meter.cycles
    stack.monitor.context_switch(0, eid)
    print(f"  core 0 switched in: {stack.meter.cycles - before} cycles "
          f"({model.l1_flush_cycles} L1 flush, {model.tlb_flush_cycles} TLB)")
    print(f"  timer trap routes to: "
          f"{stack.machine.trap_route(0, 'timer_interrupt')}")
    stack.monitor.context_switch(0, EID_OS)

    stack.monitor.teardown(eid)
    zeroed = stack.memory.is_zero(region.base, region.size)
    print(f"  torn down: region zeroed={zeroed}, "
          f"rollback counter now {meta.rollback_counter}")

print("\nidentity pool restored, nothing live:",
      sorted(stack.monitor.live) == [])
