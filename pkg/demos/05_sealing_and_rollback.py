"""Persistent enclave state survives teardown sealed, and stale copies
do not come back.

Each teardown seals the enclave's state record under a fresh monotonic
counter. Handing the monitor an old blob at the next setup is detected and
refused; only the latest seal unseals. The same mechanism guards the
monitor's own saved state through the non-volatile counter.
"""

from enclavesim.monitor import RollbackDetected
from enclavesim.packaging import quick_package

import demo_stack

stack = demo_stack.build()
pkg, config, binary = quick_package(stack.schemes[0], stack.ecosystem,
                                    "ledger", memory_bytes=64 * 1024)
stack.monitor.install(pkg)

# generation 1 runs and dies; its sealed state is the gen-1 snapshot
eid = stack.monitor.setup(config.label, binary, config)
stack.monitor.teardown(eid)
stale = stack.monitor.export_sealed_state(config.label)
print(f"generation 1 sealed: {len(stale)} byte blob, counter 1")

# generation 2 runs and dies; the plot: keep the gen-1 blob around
eid = stack.monitor.setup(config.label, binary, config)
stack.monitor.teardown(eid)
fresh = stack.monitor.export_sealed_state(config.label)
print("generation 2 sealed: counter 2")

print("\nadversary swaps the gen-1 blob back in before the next setup...")
stack.monitor.provide_sealed_state(config.label, stale)
try:
    stack.monitor.setup(config.label, binary, config)
except RollbackDetected as exc:
    print(f"  setup refused: {exc}")

stack.monitor.provide_sealed_state(config.label, fresh)
eid = stack.monitor.setup(config.label, binary, config)
print(f"\nlatest blob accepted, generation 3 live as eid {eid:#x}")
