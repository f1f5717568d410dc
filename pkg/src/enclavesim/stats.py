"""Statistics reporting and the cache-partitioning overhead workload.

The interesting question for way partitioning is the price of confinement:
the same working set replayed under different way budgets. build_way_sweep
generates that workload as ordinary scenarios so the comparison runs
through the exact machinery every other scenario uses.
"""

import random

from .cache import CacheGeometry
from .crypto import backend
from .packaging import quick_package, Ecosystem
from .scenario import Scenario, Event, Simulation, DEFAULT_TRUST_SEED


def report_stats(result):
    """Stats document for one run: the per-eid counters plus global sums."""
    doc = result.stats_doc()
    totals = {}
    for counters in result.stats.values():
        for key, value in counters.items():
            totals[key] = totals.get(key, 0) + value
    doc["global"] = totals
    return doc


def relative_overhead(baseline_cycles, cycles):
    if baseline_cycles <= 0:
        raise ValueError("baseline must be positive")
    return (cycles - baseline_cycles) / baseline_cycles


def checkpoint_delta(result, start, end=None):
    """Cycles spent between two checkpoints (end defaults to run end)."""
    begin = result.checkpoints[start]["cycles"]
    finish = result.checkpoints[end]["cycles"] if end else result.cycles
    return finish - begin


# ---------------------------------------------------------------------------
# way-sweep workload

def working_set_scenario(ways, *, label="worker", sets_touched=8,
                         lines_per_set=16, rounds=40, seed=7,
                         trust_seed=DEFAULT_TRUST_SEED, record_trace=False):
    """A strict-partitioned enclave replays a fixed working set. The set is
    sized to fill every way of the touched sets, so a smaller way budget
    must thrash while the full budget becomes hit-dominated."""
    geometry = CacheGeometry()
    schemes = backend("double")
    eco = Ecosystem.create(schemes[0], random.Random(trust_seed))
    pkg, _, _ = quick_package(
        schemes[0], eco, label, memory_bytes=256 * 1024,
        cache_mode="strict", cache_ways=ways)

    events = [Event("install", {"package": label}, 0),
              Event("setup", {"label": label}, 1),
              Event("checkpoint", {"name": "work_start"}, 2)]
    index = 3
    base = 0x8000       # clear of code, tables and the state record
    for _ in range(rounds):
        for line in range(lines_per_set):
            for s in range(sets_touched):
                offset = base + line * geometry.num_sets * geometry.line_bytes \
                    + s * geometry.line_bytes
                events.append(Event("access", {
                    "actor": label, "op": "read", "address": offset,
                    "relative_to": label, "size": 8}, index))
                index += 1
    events.append(Event("checkpoint", {"name": "work_end"}, index))

    return Scenario(name=f"way-sweep-{ways}", seed=seed,
                    max_ways_per_enclave=16, trust_seed=trust_seed,
                    record_trace=record_trace,
                    packages={label: pkg}, events=tuple(events))


def way_sweep(way_counts=(1, 2, 4, 8, 16), **kw):
    """Run the working-set workload once per way budget. Returns a list of
    rows sorted by way count, with overhead relative to the largest budget."""
    rows = []
    for ways in way_counts:
        result = Simulation(working_set_scenario(ways, **kw)).run_events()
        rows.append({"ways": ways,
                     "cycles": checkpoint_delta(result, "work_start", "work_end"),
                     "hits": result.stats.get("e1", {}).get("hits", 0),
                     "misses": result.stats.get("e1", {}).get("misses", 0)})
    baseline = rows[-1]["cycles"]
    for row in rows:
        row["overhead"] = relative_overhead(baseline, row["cycles"])
    return rows


def render_plot_data(rows):
    """Tab-separated table, one row per way budget; plottable as-is."""
    lines = ["# ways\tcycles\toverhead\thits\tmisses"]
    for row in rows:
        lines.append(f"{row['ways']}\t{row['cycles']}\t{row['overhead']:.6f}"
                     f"\t{row['hits']}\t{row['misses']}")
    return "\n".join(lines) + "\n"
