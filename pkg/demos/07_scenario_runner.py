"""Drive a whole machine from a JSON scenario and read the trace.

The scenario files under scenarios/ are the same ones the CLI runs. A run
is fully deterministic: same file, same trace, same digest, every time.
"""

import pathlib

from enclavesim.scenario import load_scenario, run

path = pathlib.Path(__file__).resolve().parent.parent \
    / "scenarios" / "lifecycle.json"
result = run(load_scenario(str(path)))

print(f"scenario  {result.scenario_name}")
print(f"cycles    {result.cycles}")
print(f"digest    {result.digest}")
print(f"live at end: {result.live_labels}")
print(f"violations:  {len(result.violations)}, errors: {len(result.errors)}")

print("\nfirst trace lines:")
for line in result.trace.splitlines()[:12]:
    print("  " + line)

again = run(load_scenario(str(path)))
print(f"\nsecond run identical: {again.trace == result.trace}")
