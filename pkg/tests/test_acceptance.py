"""Acceptance gate: nine end-to-end criteria, one test per criterion.

Each test prints a single PASS line when its criterion holds; assertion
failures mark the criterion failed. Randomized criteria use fixed seeds so
the gate itself is reproducible.
"""

import pathlib
import random

import pytest

import oracles
from conftest import FW_BASE, FW_BYTES, ZERO_BASE, ZERO_BYTES, \
    build_stack, install_and_setup
from enclavesim.attacks import attack_prime_probe
from enclavesim.bus import (REDIRECTED, WINDOW_ENCLAVE, WINDOW_OS,
                            BusTransaction, MemRegion, MemoryArbiterConfig,
                            PeripheralDescriptor, check_memory_access)
from enclavesim.cache import MODE_STRICT, CacheGeometry, PartitionedCache
from enclavesim.costs import CostModel
from enclavesim.ids import EID_FIRMWARE, EID_OS, EID_SM, POOL_IDS
from enclavesim.memory import SparseMemory
from enclavesim.monitor import NoFreeEid, NotLive, ResourceUnavailable
from enclavesim.packaging import (BadSignature, RollbackDetected,
                                  provider_verify_report, quick_package,
                                  synthesize_binary)
from enclavesim.scenario import load_scenario, run
from enclavesim.stats import way_sweep
from enclavesim.trace import Meter

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def ok(criterion, message):
    print(f"ACCEPTANCE {criterion} PASS - {message}")


# -- 1: bus soundness against the flat-memory oracle -------------------------

def test_criterion_1_bus_soundness_vs_flat_oracle():
    nic = PeripheralDescriptor("nic0", MemRegion.from_span(0xF0000000, 0x1000),
                               dma_capable=True)
    stack = build_stack(record_trace=False, peripherals=(nic,))
    eids = {}
    for label in ("alpha", "beta", "gamma", "delta"):
        extra = {"peripherals": (("nic0", True),)} if label == "alpha" else {}
        eids[label], _ = install_and_setup(stack, label, **extra)

    region_map = oracles.RangeMap()
    region_map.add(0, 0x2000, oracles.SM_ID)
    region_map.add(FW_BASE, FW_BYTES, oracles.FW_ID)
    layouts = {}
    for label, eid in eids.items():
        region = stack.arbiter.regions[eid]
        region_map.add(region.base, region.size, eid)
        layouts[eid] = stack.monitor.live[eid].layout
    windows = {eid: [lay.window_base, 4096, eid, "enclave"]
               for eid, lay in layouts.items()}

    # one window lives OS-side for the whole stream
    handed_over = eids["beta"]
    stack.monitor.shared_memory_handoff(handed_over, handed_over, EID_OS)
    windows[handed_over][3] = "os"
    window_rows = list(windows.values())

    # the oracle starts from the machine's post-setup memory image: sweep it
    # as the monitor, which the arbiter lets through everywhere
    flat = oracles.FlatMemory()
    for base in range(0, stack.memory.size, 64):
        _, data, _ = stack.bus.route(BusTransaction(EID_SM, "read", base, 64))
        if data != bytes(64):
            flat.write(base, data, oracles.SM_ID)

    rng = random.Random(0xACCE55)
    actors = [EID_OS, EID_OS, EID_FIRMWARE, EID_SM] + list(eids.values()) * 2
    sizes = (1, 2, 4, 8, 16, 32, 64)
    edges = []
    for eid in eids.values():
        region = stack.arbiter.regions[eid]
        edges += [region.base, region.end - 64, layouts[eid].window_base,
                  layouts[eid].window_base - 64, layouts[eid].heap_base]
    edges += [0, 0x2000 - 64, ZERO_BASE, ZERO_BASE + ZERO_BYTES,
              FW_BASE, FW_BASE + FW_BYTES - 64, 0x80000]

    def pick_address(size):
        kind = rng.randrange(4)
        if kind == 0:
            base = rng.choice(edges)
        elif kind == 1:
            region = stack.arbiter.regions[rng.choice(list(eids.values()))]
            base = region.base + rng.randrange(region.size)
        else:
            base = rng.randrange(stack.memory.size)
        return min(base - base % size, stack.memory.size - 64)

    dma_region = nic.dma_allowed
    assert nic.bound_eid == eids["alpha"]

    redirected_total = 0
    for step in range(1_000_000):
        size = rng.choice(sizes)
        address = pick_address(size)
        op = "read" if rng.randrange(2) else "write"
        payload = bytes((step + i) & 0xFF for i in range(size)) \
            if op == "write" else b""
        if step % 10 == 9:
            txn = BusTransaction(eids["alpha"], op, address, size, payload,
                                 ("dma", "nic0"))
            ends = (oracles.decide_dma(a, dma_region.base, dma_region.size)
                    for a in (address, address + size - 1))
            expected = oracles.ALLOWED \
                if all(v == oracles.ALLOWED for v in ends) \
                else oracles.REDIRECTED
            space = "dma"
        else:
            actor = rng.choice(actors)
            txn = BusTransaction(actor, op, address, size, payload)
            expected = oracles.decide(actor, address, region_map,
                                      ZERO_BASE, ZERO_BYTES, window_rows)
            space = "mem"

        before = len(stack.meter.pending_violations)
        verdict, data, _ = stack.bus.route(txn)
        assert verdict == expected, \
            f"step {step}: eid={txn.eid:#x} addr={address:#x} {op} " \
            f"got {verdict}, oracle says {expected}"
        if verdict == REDIRECTED:
            redirected_total += 1
            assert len(stack.meter.pending_violations) == before + 1
            record = stack.meter.pending_violations[-1]
            assert (record.eid, record.address, record.op, record.space) \
                == (txn.eid, address, op, space)
            if op == "read":
                assert data == bytes(size), "redirect leaked data"
        else:
            assert len(stack.meter.pending_violations) == before
            if op == "write":
                flat.write(address, payload, txn.eid)
            else:
                assert data == flat.read(address, size), \
                    f"step {step}: read at {address:#x} diverged from oracle"
        if step % 65536 == 65535:
            stack.monitor.handle_violations()

    stack.monitor.handle_violations()
    assert len(stack.monitor.violation_log) == redirected_total
    assert redirected_total > 100_000     # the stream actually probed
    ok(1, f"10^6 transactions, 0 soundness violations, "
          f"{redirected_total} redirects all logged")


# -- 2: exhaustive truth table on a tiny machine ------------------------------

def test_criterion_2_exhaustive_truth_table():
    zero = MemRegion.from_span(0x200, 0x10)
    arbiter = MemoryArbiterConfig(zero)
    spans = [(0xF, 0x000, 0x10), (0x1, 0x100, 0x10), (0x2, 0x110, 0x10),
             (0x3, 0x140, 0x10), (0x4, 0x170, 0x10), (0xE, 0x180, 0x10)]
    for eid, base, size in spans:
        arbiter.set_region(eid, MemRegion.from_span(base, size))
    arbiter.set_window(0x3, MemRegion.from_span(0x140, 0x10), WINDOW_ENCLAVE)

    checked = 0
    for owner_kind in (WINDOW_ENCLAVE, WINDOW_OS):
        arbiter.set_window_owner(0x3, owner_kind)
        region_map = oracles.RangeMap()
        for eid, base, size in spans:
            region_map.add(base, size, eid)
        windows = [(0x140, 0x10, 0x3,
                    "enclave" if owner_kind == WINDOW_ENCLAVE else "os")]
        for eid in range(16):
            for address in range(0x400):
                for op in ("read", "write"):
                    data = b"\x00" if op == "write" else b""
                    txn = BusTransaction(eid, op, address, 1, data)
                    got = check_memory_access(txn, arbiter).verdict
                    want = oracles.decide(eid, address, region_map,
                                          zero.base, zero.size, windows)
                    assert got == want, \
                        f"eid={eid:#x} addr={address:#x} {op} " \
                        f"owner={owner_kind}: {got} != {want}"
                    checked += 1
    ok(2, f"truth table over {checked} (eid,address,op) cells, "
          f"both window owners, exact match")


# -- 3: prime+probe accuracy bands --------------------------------------------

def test_criterion_3_prime_probe_accuracy_bands():
    undefended = attack_prime_probe(trials=1000, victim_strict=False)
    assert undefended.verdict == "leaked"
    assert undefended.accuracy >= 0.99

    defended = attack_prime_probe(trials=1000, victim_strict=True)
    assert defended.verdict == "contained"
    assert 0.45 <= defended.accuracy <= 0.55
    ok(3, f"accuracy {undefended.accuracy:.3f} unpartitioned (>=0.99), "
          f"{defended.accuracy:.3f} partitioned (in [0.45,0.55])")


# -- 4: strict lines never leave their ways ------------------------------------

def test_criterion_4_strict_lines_stay_in_their_ways():
    rng = random.Random(4242)
    meter = Meter(CostModel(), record_trace=False)
    memory = SparseMemory(1 << 20)
    cache = PartitionedCache(CacheGeometry(16, 8, 64), memory,
                             random.Random(7), meter, max_ways_per_enclave=8)
    strict_eids = {0x1: 2, 0x2: 3}
    for eid, count in strict_eids.items():
        cache.allocate_ways(EID_SM, eid, count)
        cache.set_mode(EID_SM, eid, MODE_STRICT)
    actors = [EID_OS, 0x1, 0x2, 0x3]

    bad_victims = []
    original = cache.select_victim

    def recording_select(eid, set_index):
        way = original(eid, set_index)
        for other in strict_eids:
            if other != eid and way in cache.allocated_ways(other):
                bad_victims.append((eid, set_index, way))
        return way

    cache.select_victim = recording_select

    def sweep_lines():
        for ways in cache.sets:
            for way, line in enumerate(ways):
                if line.valid and line.eid in strict_eids:
                    assert way in cache.allocated_ways(line.eid), \
                        f"strict line of eid {line.eid:#x} in way {way}"

    for step in range(100_000):
        actor = rng.choice(actors)
        address = rng.randrange(0, 1 << 20, 8)
        if rng.randrange(2):
            cache.access(actor, address, 8, "read")
        else:
            cache.access(actor, address, 8, "write", bytes(8))
        if step % 10_000 == 9_999:
            sweep_lines()
    sweep_lines()
    assert bad_victims == [], bad_victims[:5]
    ok(4, "10^5 accesses: strict lines confined, no victim selection "
          "named a foreign exclusive way")


# -- 5: lifecycle safety under random event storms ------------------------------

def test_criterion_5_randomized_lifecycle_safety():
    events_total = 0
    cap_hits = 0
    for seq in range(5):
        rng = random.Random(5000 + seq)
        stack = build_stack(record_trace=False, seed=900 + seq)
        packages = {}
        last_counter = {}
        for i in range(15):
            pkg, config, binary = quick_package(
                stack.schemes[0], stack.ecosystem, f"job{i}",
                enclave_type="sub", memory_bytes=16 * 1024, binary_bytes=2048)
            stack.monitor.install(pkg)
            packages[config.label] = (config, binary)
            last_counter[config.label] = 0
        labels = sorted(packages)

        def tear(eid):
            runtime = stack.monitor.live[eid]
            meta = stack.monitor.installed[runtime.label]
            region = stack.arbiter.regions[eid]
            stack.monitor.teardown(eid)
            assert stack.memory.is_zero(region.base, region.size), \
                f"residue after teardown of {runtime.label}"
            assert meta.rollback_counter == last_counter[runtime.label] + 1
            last_counter[runtime.label] = meta.rollback_counter
            with pytest.raises(NotLive):
                stack.monitor.teardown(eid)

        for _ in range(2000):
            events_total += 1
            label = rng.choice(labels)
            config, binary = packages[label]
            live_eid = stack.monitor.label_to_eid.get(label)
            if live_eid is None:
                if len(stack.monitor.live) == len(POOL_IDS):
                    with pytest.raises(NoFreeEid):
                        stack.monitor.setup(label, binary, config)
                    cap_hits += 1
                    tear(rng.choice(sorted(stack.monitor.live)))
                else:
                    stack.monitor.setup(label, binary, config)
            else:
                if rng.randrange(4) == 0:
                    # a second setup of a live label must be refused
                    with pytest.raises(ResourceUnavailable):
                        stack.monitor.setup(label, binary, config)
                if rng.randrange(2):    # keep occupancy high: tear down lazily
                    tear(live_eid)

            live = set(stack.monitor.live)
            free = set(stack.monitor._free_eids)
            assert live | free == set(POOL_IDS) and not live & free, \
                "identity pool leaked or double-booked"
    assert cap_hits > 0, "the identity cap was never exercised"
    ok(5, f"{events_total} lifecycle events over 5 machines: pool conserved, "
          f"cap enforced {cap_hits} times, counters monotone, regions zeroed")


# -- 6: sealing freshness and attestation exactness ------------------------------

def test_criterion_6_sealing_and_attestation_exactness():
    stack = build_stack()
    binary = synthesize_binary("sealed", 64, seed=3)
    pkg, config, _ = quick_package(stack.schemes[0], stack.ecosystem,
                                   "sealed", binary=binary)
    stack.monitor.install(pkg)

    blobs = []
    for _ in range(6):
        eid = stack.monitor.setup(config.label, binary, config)
        stack.monitor.teardown(eid)
        blobs.append(stack.monitor.export_sealed_state(config.label))

    replays_rejected = 0
    for stale in blobs[:-1]:
        stack.monitor.provide_sealed_state(config.label, stale)
        with pytest.raises(RollbackDetected):
            stack.monitor.setup(config.label, binary, config)
        replays_rejected += 1
    stack.monitor.provide_sealed_state(config.label, blobs[-1])

    flips_rejected = 0
    for i in range(64):
        flipped = bytearray(binary)
        flipped[i] ^= 0x01
        with pytest.raises(BadSignature):
            stack.monitor.setup(config.label, bytes(flipped), config)
        flips_rejected += 1

    # the unmodified image under a fresh nonce is accepted end to end
    eid = stack.monitor.setup(config.label, binary, config)
    nonce = bytes(range(32))
    report = stack.monitor.attest(eid, nonce)
    meta = stack.monitor.installed[config.label]
    assert provider_verify_report(stack.schemes[0], report,
                                  stack.ecosystem.device_root_public,
                                  meta.package_sig, nonce)
    assert not provider_verify_report(stack.schemes[0], report,
                                      stack.ecosystem.device_root_public,
                                      meta.package_sig, bytes(32))
    ok(6, f"{replays_rejected} stale blobs rejected, {flips_rejected}/64 "
          f"byte flips rejected, pristine image attested")


# -- 7: context switch cost is exact ---------------------------------------------

def test_criterion_7_context_switch_cost_exact():
    stack = build_stack()
    eid, _ = install_and_setup(stack, "worker")
    model = CostModel()
    before = stack.meter.cycles
    stack.monitor.context_switch(0, eid)
    delta = stack.meter.cycles - before
    assert delta == model.tlb_flush_cycles + model.l1_flush_cycles == 3169
    ok(7, f"context switch costs exactly {delta} cycles "
          f"({model.l1_flush_cycles} L1 flush + {model.tlb_flush_cycles} TLB)")


# -- 8: partitioning overhead trend ------------------------------------------------

def test_criterion_8_way_partitioning_overhead_trend():
    rows = way_sweep(way_counts=(1, 2, 4, 8, 16), rounds=12)
    cycles = [row["cycles"] for row in rows]
    overheads = [row["overhead"] for row in rows]
    assert cycles[0] > cycles[-1], "1/16 ways must cost strictly more"
    assert all(a >= b for a, b in zip(overheads, overheads[1:])), \
        f"overhead not non-increasing: {overheads}"
    assert overheads[-1] == 0.0
    ok(8, "overheads " + ", ".join(f"{o:.3f}" for o in overheads)
          + " non-increasing over ways 1,2,4,8,16")


# -- 9: whole-suite determinism ------------------------------------------------------

def test_criterion_9_scenario_suite_determinism():
    paths = sorted(SCENARIO_DIR.glob("*.json"))
    assert len(paths) == 9, f"expected the full suite, found {paths}"
    for path in paths:
        first = run(load_scenario(str(path)))
        second = run(load_scenario(str(path)))
        assert first.trace == second.trace, f"{path.name} diverged"
        assert first.digest == second.digest
        assert first.stats == second.stats
        assert first.cycles == second.cycles
    ok(9, f"{len(paths)} scenarios, two runs each, byte-identical traces")
