"""Attack scenarios with falsifiable verdicts.

Each attack returns contained/leaked based on observed data, never on the
configuration it started from. Every attack also has a negative control:
run with the corresponding defense disabled, the same observation code must
report leaked. A defense that cannot fail its control is not being tested.
"""

import dataclasses
import random

from .bus import BusTransaction, REDIRECTED
from .crypto import backend
from .errors import EnclaveSimError, TranslationFault
from .ids import EID_OS, EID_SM
from .monitor import BadPageTables
from .packaging import Ecosystem, RollbackDetected, quick_package
from .scenario import PeripheralSpec, Scenario, Simulation
from . import paging

# attack fixtures sign under the default trust anchor
_TRUST = 0x5EED


def _schemes_and_ecosystem():
    schemes = backend("double")
    return schemes, Ecosystem.create(schemes[0], random.Random(_TRUST))


@dataclasses.dataclass
class AttackResult:
    name: str
    verdict: str                # "contained" | "leaked"
    details: dict
    accuracy: float = None

    @property
    def contained(self):
        return self.verdict == "contained"


def _fresh_sim(packages, peripherals=(), seed=1, **knobs):
    scenario = Scenario(name="attack", seed=seed, cores=2,
                        record_trace=False, peripherals=tuple(peripherals),
                        packages=dict(packages))
    sim = Simulation(scenario, **knobs)
    sim.boot()
    return sim


def _install_and_setup(sim, pkg, config, binary):
    sim.monitor.install(pkg)
    return sim.monitor.setup(config.label, binary, config)


def _write_as(sim, eid, address, data):
    for offset in range(0, len(data), 8):
        chunk = data[offset:offset + 8]
        sim.bus.route(BusTransaction(eid, "write", address + offset,
                                     len(chunk), chunk))


def _read_as(sim, eid, address, size=8):
    verdict, data, _ = sim.bus.route(
        BusTransaction(eid, "read", address, size))
    return verdict, data


SECRET = bytes(range(0x41, 0x49)) * 8      # 64 recognizable bytes


# ---------------------------------------------------------------------------
# privileged-software probe of enclave memory

def attack_os_probe(target_label="vault", negative_control=False,
                    probe_window=False):
    """The OS sweeps a live enclave's region. Contained iff every read came
    back all-zero with a redirect verdict and a matching violation record.
    A shared window currently owned by the OS is legitimately readable and
    is not counted.

    Negative control: the monitor's region register for the enclave is
    deliberately cleared after setup (misconfigured arbiter); the probe must
    then see real data."""
    schemes, eco = _schemes_and_ecosystem()
    pkg, config, binary = quick_package(schemes[0], eco, target_label,
                                        memory_bytes=64 * 1024)
    sim = _fresh_sim({target_label: pkg})
    eid = _install_and_setup(sim, pkg, config, binary)
    layout = sim.monitor.live[eid].layout

    _write_as(sim, eid, layout.heap_base, SECRET)
    if probe_window:
        _write_as(sim, eid, layout.window_base, SECRET)
        sim.monitor.shared_memory_handoff(eid, eid, EID_OS)
    if negative_control:
        sim.bus.clear_region(EID_SM, eid)

    probes = [layout.code_base, layout.state_base, layout.heap_base,
              layout.window_base]
    probes += list(range(layout.region_base, layout.region_base
                         + layout.region_size, 4096))
    leaks = []
    redirects = 0
    window_reads = 0
    for address in probes:
        in_window = layout.window_base <= address < layout.window_base + 4096
        before = len(sim.meter.pending_violations)
        verdict, data = _read_as(sim, EID_OS, address, 64)
        if probe_window and in_window:
            window_reads += 1       # OS-owned window: visible by design
            continue
        violation_logged = len(sim.meter.pending_violations) == before + 1
        if verdict == REDIRECTED and not any(data) and violation_logged:
            redirects += 1
        else:
            leaks.append({"address": hex(address), "verdict": verdict,
                          "data": data.hex()})
    sim.monitor.handle_violations()
    verdict = "contained" if not leaks else "leaked"
    return AttackResult("os_probe", verdict, {
        "probes": len(probes), "redirected": redirects,
        "window_reads": window_reads, "leaks": leaks[:8]})


# ---------------------------------------------------------------------------
# DMA sweep

def attack_dma(device="nic0", target_label="vault", bind_to_attacker=False,
               negative_control=False):
    """A DMA-capable device sweeps the victim's region. Unbound devices are
    deny-all; a device bound to another enclave is confined to that
    enclave's window. Contained iff every sweep read was redirected and
    all-zero. Negative control: the per-device bus filter is disabled."""
    schemes, eco = _schemes_and_ecosystem()
    victim_pkg, victim_cfg, victim_bin = quick_package(
        schemes[0], eco, target_label, memory_bytes=64 * 1024)
    packages = {target_label: victim_pkg}
    if bind_to_attacker:
        attacker_pkg, attacker_cfg, attacker_bin = quick_package(
            schemes[0], eco, "intruder", memory_bytes=32 * 1024,
            peripherals=((device, True),))
        packages["intruder"] = attacker_pkg

    sim = _fresh_sim(packages,
                     peripherals=(PeripheralSpec(device, 0xF0000000, 4096, True),),
                     disable_dma_filter=negative_control)
    victim_eid = _install_and_setup(sim, victim_pkg, victim_cfg, victim_bin)
    if bind_to_attacker:
        _install_and_setup(sim, attacker_pkg, attacker_cfg, attacker_bin)

    layout = sim.monitor.live[victim_eid].layout
    _write_as(sim, victim_eid, layout.heap_base, SECRET)

    dev = sim.bus.peripherals[device]
    leaks = []
    redirected = 0
    for address in range(layout.region_base,
                         layout.region_base + layout.region_size, 4096):
        eid = dev.bound_eid if dev.bound_eid is not None else EID_OS
        verdict, data, _ = sim.bus.route(
            BusTransaction(eid, "read", address, 64, origin=("dma", device)))
        if verdict == REDIRECTED and not any(data):
            redirected += 1
        else:
            leaks.append({"address": hex(address), "verdict": verdict,
                          "data": data[:8].hex()})
    sim.monitor.handle_violations()
    verdict = "contained" if not leaks else "leaked"
    return AttackResult("dma", verdict, {
        "device": device, "bound": dev.bound_eid is not None,
        "sweeps": redirected + len(leaks), "redirected": redirected,
        "leaks": leaks[:8]})


# ---------------------------------------------------------------------------
# prime+probe on the shared L2

def attack_prime_probe(victim_label="victim", trials=1000, *,
                       victim_strict=True, victim_idle=False, seed=1234,
                       calibration_per_bit=16):
    """Occupancy distinguisher. The OS primes the free ways of eight cache
    sets, lets the victim touch four of them (which four encodes one secret
    bit), then re-reads the primed lines counting per-set misses. A
    nearest-centroid classifier trained on calibration trials guesses the
    bit. Returns the accuracy over fresh trials.

    With the victim confined to exclusively allocated ways the probe vector
    cannot depend on victim activity, so accuracy collapses to coin level."""
    schemes, eco = _schemes_and_ecosystem()
    pkg, config, binary = quick_package(
        schemes[0], eco, victim_label, memory_bytes=64 * 1024,
        cache_mode="strict" if victim_strict else "basic",
        cache_ways=2 if victim_strict else 0)
    sim = _fresh_sim({victim_label: pkg}, seed=seed)
    eid = _install_and_setup(sim, pkg, config, binary)
    layout = sim.monitor.live[eid].layout
    geometry = sim.cache.geometry

    attack_rng = random.Random(seed ^ 0xA77AC)
    probed_sets = range(8)
    victim_ways = len(sim.cache.allocated_ways(eid))
    prime_depth = geometry.num_ways - victim_ways
    set_stride = geometry.num_sets * geometry.line_bytes

    # OS-space prime addresses: outside every region, distinct tag per way
    prime_base = 0x400000
    assert prime_base > layout.region_base + layout.region_size

    def prime_address(set_index, depth):
        return prime_base + depth * set_stride + set_index * geometry.line_bytes

    def victim_address(set_index):
        return layout.region_base + 0x8000 + set_index * geometry.line_bytes

    def one_trial(bit):
        # SM scrubs both parties' lines: the attacker starts from a cold,
        # deterministic prime every time
        sim.cache.flush_enclave_lines(EID_SM, EID_OS)
        sim.cache.flush_enclave_lines(EID_SM, eid)
        for s in probed_sets:
            for d in range(prime_depth):
                _read_as(sim, EID_OS, prime_address(s, d), 8)
        if not victim_idle:
            for k in range(4):
                _read_as(sim, eid, victim_address(4 * bit + k), 8)
        vector = []
        for s in probed_sets:
            misses_before = sim.meter.stat(EID_OS, "misses")
            for d in range(prime_depth):
                _read_as(sim, EID_OS, prime_address(s, d), 8)
            vector.append(sim.meter.stat(EID_OS, "misses") - misses_before)
        return tuple(vector)

    def centroid(vectors):
        n = len(vectors)
        return tuple(sum(v[i] for v in vectors) / n for i in range(8))

    def distance(v, c):
        return sum((a - b) ** 2 for a, b in zip(v, c))

    centroids = []
    for bit in (0, 1):
        centroids.append(centroid(
            [one_trial(bit) for _ in range(calibration_per_bit)]))

    correct = 0
    for _ in range(trials):
        bit = attack_rng.getrandbits(1)
        vector = one_trial(bit)
        d0, d1 = distance(vector, centroids[0]), distance(vector, centroids[1])
        if d0 == d1:
            guess = attack_rng.getrandbits(1)
        else:
            guess = 0 if d0 < d1 else 1
        correct += (guess == bit)

    accuracy = correct / trials
    verdict = "contained" if accuracy < 0.6 else "leaked"
    return AttackResult("prime_probe", verdict, {
        "trials": trials, "victim_strict": victim_strict,
        "victim_idle": victim_idle, "prime_depth": prime_depth,
        "centroids": [list(c) for c in centroids]}, accuracy=accuracy)


# ---------------------------------------------------------------------------
# page-table escape

def attack_pt_escape(label="victim", negative_control=False):
    """Two escape paths: asking the monitor to map foreign memory, and the
    enclave rewriting its own second-level table directly (its table area is
    plain enclave memory from the arbiter's point of view). Contained iff
    the first is rejected at verification and the second's data access comes
    back redirected and zero-filled.

    Negative control: verification skipped AND memory filter off."""
    schemes, eco = _schemes_and_ecosystem()
    pkg, config, binary = quick_package(schemes[0], eco, label,
                                        memory_bytes=64 * 1024)
    sim = _fresh_sim({label: pkg},
                     skip_pt_verification=negative_control,
                     disable_memory_filter=negative_control)
    eid = _install_and_setup(sim, pkg, config, binary)
    layout = sim.monitor.live[eid].layout

    # the loot: OS data the enclave must never see
    loot_address = 0x500000
    _write_as(sim, EID_OS, loot_address, SECRET)
    loot_page = loot_address & ~(paging.PAGE_BYTES - 1)

    details = {"monitor_rejected": False, "rewrite_redirected": False}
    observations = []

    # path 1: ask the monitor for a mapping that leaves the region
    va = layout.region_size           # just past the linear map, table exists
    evil = paging.make_pte(loot_page >> paging.PAGE_SHIFT,
                           paging.PTE_VALID | paging.PTE_READ)
    try:
        sim.monitor.add_page_mapping(eid, (va, evil))
        observations.append("monitor accepted a foreign mapping")
    except BadPageTables:
        details["monitor_rejected"] = True

    # path 2: the enclave scribbles the same entry into its own tables
    vpn1, vpn0, _ = paging.split_va(va)
    l2_base = layout.pt_base + paging.PAGE_BYTES      # first second-level table
    entry_address = l2_base + vpn0 * paging.PTE_BYTES
    _write_as(sim, eid, entry_address, evil.to_bytes(4, "little"))
    try:
        pa = sim.monitor.translate(eid, va + (loot_address - loot_page), "r")
        verdict, data, _ = sim.bus.route(BusTransaction(eid, "read", pa, 8))
        if verdict == REDIRECTED and not any(data):
            details["rewrite_redirected"] = True
        elif data == SECRET[:8]:
            observations.append("enclave read OS data through rewritten table")
        else:
            observations.append(f"unexpected outcome {verdict}:{data.hex()}")
    except TranslationFault as exc:
        # also safe: the walk itself refused
        details["rewrite_redirected"] = True
        details["fault"] = str(exc)

    sim.monitor.handle_violations()
    contained = details["monitor_rejected"] and details["rewrite_redirected"]
    details["observations"] = observations
    return AttackResult("pt_escape",
                        "contained" if contained else "leaked", details)


# ---------------------------------------------------------------------------
# sealed-state rollback

def attack_rollback(label="vault", negative_control=False):
    """Run two full lifecycles, then offer the monitor the blob from two
    teardowns ago. Contained iff the stale blob is rejected with a rollback
    error. Offering the current blob must still succeed (freshness, not
    paranoia). Negative control: the counter storage is wiped first."""
    schemes, eco = _schemes_and_ecosystem()
    pkg, config, binary = quick_package(schemes[0], eco, label,
                                        memory_bytes=64 * 1024)
    sim = _fresh_sim({label: pkg})
    monitor = sim.monitor
    label_bytes = config.label

    monitor.install(pkg)

    def cycle(stamp):
        eid = monitor.setup(label_bytes, binary, config)
        layout = monitor.live[eid].layout
        # the enclave leaves a recognizable mark in its persistent record
        state_raw = bytearray(sim.memory.read(layout.state_base, 64))
        state_raw[24] = 1                       # one stored key
        state_raw[25] = stamp                   # key id doubles as the mark
        _write_as(sim, eid, layout.state_base, bytes(state_raw))
        monitor.teardown(eid)
        return monitor.export_sealed_state(label_bytes)

    blob_old = cycle(stamp=1)
    blob_new = cycle(stamp=2)

    details = {"stale_rejected": False, "fresh_accepted": False}
    if negative_control:
        monitor.reset_rollback_counter(label_bytes, 1)   # storage wiped

    monitor.provide_sealed_state(label_bytes, blob_old)
    try:
        eid = monitor.setup(label_bytes, binary, config)
        layout = monitor.live[eid].layout
        mark = sim.memory.read(layout.state_base, 64)[25]
        details["stale_state_mark"] = mark
        monitor.teardown(eid)
    except RollbackDetected:
        details["stale_rejected"] = True
        # the monitor still holds the genuine latest blob; restore custody
        monitor.provide_sealed_state(label_bytes, blob_new)
        try:
            eid = monitor.setup(label_bytes, binary, config)
            details["fresh_accepted"] = True
            monitor.teardown(eid)
        except EnclaveSimError as exc:
            details["fresh_error"] = str(exc)

    contained = details["stale_rejected"] and details["fresh_accepted"]
    return AttackResult("rollback",
                        "contained" if contained else "leaked", details)


ATTACKS = {
    "os_probe": attack_os_probe,
    "dma": attack_dma,
    "prime_probe": attack_prime_probe,
    "pt_escape": attack_pt_escape,
    "rollback": attack_rollback,
}
