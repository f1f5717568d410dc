"""Scenario layer: parsing with positional error messages, event execution,
determinism of whole runs."""

import hashlib
import json

import pytest

from enclavesim.costs import CostModel
from enclavesim.scenario import (DEFAULT_TRUST_SEED, Scenario, ScenarioError,
                                 load_scenario, make_package_for,
                                 parse_scenario, run)
from enclavesim.trace import TRACE_HEADER

VAULT = make_package_for(DEFAULT_TRUST_SEED, "vault")
KRN = make_package_for(DEFAULT_TRUST_SEED, "krn", enclave_type="kernel",
                       cores=1)
NICVAULT = make_package_for(DEFAULT_TRUST_SEED, "nicvault",
                            peripherals=(("nic0", True),))
BLOBS = {"vault": VAULT, "krn": KRN, "nicvault": NICVAULT}


def loader(ref):
    if ref not in BLOBS:
        raise FileNotFoundError(ref)
    return BLOBS[ref]


def text_of(**over):
    doc = {"name": "t", "packages": ["vault"], "events": []}
    doc.update(over)
    return json.dumps(doc)


def parse(**over):
    return parse_scenario(text_of(**over), loader)


def rejects(message, **over):
    with pytest.raises(ScenarioError) as info:
        parse(**over)
    assert message in str(info.value), str(info.value)


# -- parsing ---------------------------------------------------------------------

def test_minimal_document_parses_with_defaults():
    scn = parse()
    assert scn.name == "t"
    assert scn.seed == 0 and scn.cores == 2
    assert scn.packages == {"vault": VAULT}
    assert scn.labels() == {"vault": "vault"}
    assert scn.events == ()


def test_events_carry_kind_args_and_position():
    scn = parse(events=[{"event": "install", "package": "vault"},
                        {"event": "checkpoint", "name": "a"}])
    assert [e.kind for e in scn.events] == ["install", "checkpoint"]
    assert scn.events[0].args["package"] == "vault"
    assert scn.events[1].index == 1
    assert scn.events[1].where() == "events[1]"


def test_addresses_accept_hex_strings():
    scn = parse(memory_bytes="0x200000",
                events=[{"event": "install", "package": "vault"},
                        {"event": "setup", "label": "vault"},
                        {"event": "access", "actor": "os",
                         "address": "0x1F00", "op": "read"}])
    assert scn.memory_bytes == 0x200000
    assert scn.events[2].args["address"] == "0x1F00"


def test_top_level_rejections():
    with pytest.raises(ScenarioError) as info:
        parse_scenario("not json {", loader)
    assert "line 1" in str(info.value)
    with pytest.raises(ScenarioError) as info:
        parse_scenario("[1, 2]", loader)
    assert "expected an object" in str(info.value)
    rejects("scenario.bogus: unknown field", bogus=1)
    rejects("scenario.seed: out of unsigned 64-bit range", seed=-1)
    rejects("scenario.cores: at least one core", cores=0)
    rejects("scenario.backend: unknown backend", backend="pigeon")
    rejects("scenario.name: expected str, got int", name=7)
    rejects("scenario.record_trace: expected bool", record_trace="yes")


def test_cache_and_cost_rejections():
    rejects("cache: ", cache={"sets": 3})
    rejects("cache.slack: unknown field", cache={"slack": 1})
    rejects("cost_model.frobnicate: unknown cost constant",
            cost_model={"frobnicate": 1})
    rejects("cost_model.dram_cycles: expected non-negative integer",
            cost_model={"dram_cycles": -5})
    rejects("cost_model.dram_cycles: expected non-negative integer",
            cost_model={"dram_cycles": True})


def test_peripheral_rejections():
    rejects("peripherals[0]: expected an object", peripherals=["nic0"])
    rejects("peripherals[0].name: required field missing",
            peripherals=[{"mmio_base": 1}])
    rejects("peripherals[1].name: duplicate peripheral 'n'",
            peripherals=[{"name": "n"}, {"name": "n"}])
    rejects("peripherals[0].color: unknown field",
            peripherals=[{"name": "n", "color": "red"}])


def test_package_rejections():
    rejects("packages[0]: expected a path string", packages=[7])
    rejects("packages[1]: duplicate reference 'vault'",
            packages=["vault", "vault"])
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text_of(), loader=None)
    assert "no package loader available" in str(info.value)
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text_of(packages=["missing"]), loader)
    assert "cannot load 'missing'" in str(info.value)
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text_of(packages=["junk"]),
                       loader=lambda ref: b"not a package")
    assert "undecodable package" in str(info.value)


def test_event_rejections():
    def ev(doc, message):
        rejects(message, events=[doc])

    ev(7, "events[0]: expected an object")
    ev({"event": "dance"}, "events[0].event: unknown kind 'dance'")
    ev({"event": "install"}, "events[0].package: required field missing")
    ev({"event": "install", "package": "vault", "x": 1},
       "events[0].x: unknown field")
    ev({"event": "install", "package": "other"},
       "events[0].package: 'other' not in declared packages")
    ev({"event": "install", "package": "vault", "core": 9},
       "events[0].core: core 9 not in machine")
    ev({"event": "setup", "label": "ghost"},
       "events[0].label: 'ghost' is not a declared enclave")
    ev({"event": "access", "actor": "vault", "op": "steal"},
       "events[0].op: expected read or write")
    ev({"event": "access", "actor": "vault", "op": "read", "size": 12},
       "events[0].size: power of two up to 64 required")
    ev({"event": "access", "actor": "vault", "op": "read", "size": 128},
       "events[0].size")
    ev({"event": "access", "actor": "vault", "op": "write", "data": "zz"},
       "events[0].data: not hex")
    ev({"event": "access", "actor": "vault", "op": "write", "size": 4,
        "data": "aabb"}, "events[0].data: length must equal size")
    ev({"event": "access", "actor": "vault", "op": "read", "address": True},
       "events[0].address: expected integer, got boolean")
    ev({"event": "access", "actor": "vault", "op": "read", "address": "0xQQ"},
       "events[0].address: bad address")
    ev({"event": "access", "actor": "bob", "op": "read"},
       "events[0].actor: unknown actor 'bob'")
    ev({"event": "access", "actor": "os", "op": "read", "relative_to": "bob"},
       "events[0].relative_to: unknown enclave 'bob'")
    ev({"event": "access", "actor": "os", "op": "read",
        "relative_to": "vault", "area": "attic"}, "events[0].area:")
    ev({"event": "syscall", "actor": "os"},
       "events[0].actor: syscalls come from enclaves")
    ev({"event": "interrupt", "class": "cosmic_ray"},
       "events[0].class: expected one of")
    ev({"event": "dma", "device": "nope", "op": "read"},
       "events[0].device: unknown device 'nope'")
    ev({"event": "handoff", "region": "os", "from": "os", "to": "os"},
       "events[0].region: unknown enclave 'os'")
    ev({"event": "handoff", "region": "vault", "from": "vault", "to": "fw"},
       "events[0].to: expected os or an enclave")
    ev({"event": "attest", "label": "vault", "nonce": "q"},
       "events[0].nonce: not hex")
    ev({"event": "attest", "label": "vault", "nonce": "aa"},
       "events[0].nonce: need 32 bytes")
    ev({"event": "allocate_ways", "label": "vault", "count": 0},
       "events[0].count: must be positive")
    ev({"event": "set_mode", "label": "vault", "mode": "loose"},
       "events[0].mode: expected basic or strict")
    ev({"event": "checkpoint"}, "events[0].name: required field missing")


def test_error_positions_use_the_event_index():
    rejects("events[2].label:",
            events=[{"event": "install", "package": "vault"},
                    {"event": "setup", "label": "vault"},
                    {"event": "teardown", "label": "ghost"}])


# -- execution -------------------------------------------------------------------

def test_empty_scenario_runs_to_nothing():
    result = run(Scenario(name="empty"))
    assert result.cycles == 0
    assert result.trace == TRACE_HEADER + "\n"
    assert result.digest == hashlib.sha256(result.trace.encode()).hexdigest()
    assert result.stats == {} and result.violations == []
    assert result.live_labels == []


def lifecycle_text(**over):
    return text_of(
        seed=7,
        peripherals=[{"name": "nic0", "dma": True}],
        packages=["vault", "nicvault"],
        events=[
            {"event": "install", "package": "vault"},
            {"event": "install", "package": "nicvault"},
            {"event": "setup", "label": "vault"},
            {"event": "setup", "label": "nicvault", "core": 1},
            {"event": "checkpoint", "name": "up"},
            {"event": "access", "actor": "vault", "op": "write",
             "address": "0x40", "size": 8, "physical": False},
            {"event": "access", "actor": "os", "op": "read",
             "relative_to": "vault", "area": "heap"},
            {"event": "allocate_ways", "label": "vault", "count": 2},
            {"event": "set_mode", "label": "vault", "mode": "strict"},
            {"event": "syscall", "actor": "vault"},
            {"event": "interrupt", "core": 0, "class": "timer_interrupt"},
            {"event": "dma", "device": "nic0", "op": "write",
             "relative_to": "nicvault", "area": "heap", "size": 16},
            {"event": "handoff", "region": "vault", "from": "vault",
             "to": "os"},
            {"event": "access", "actor": "os", "op": "write",
             "relative_to": "vault", "area": "window", "size": 8},
            {"event": "attest", "label": "vault"},
            {"event": "checkpoint", "name": "done"},
            {"event": "teardown", "label": "vault"},
        ],
        **over)


def test_rich_lifecycle_executes_without_errors():
    result = run(parse_scenario(lifecycle_text(), loader))
    assert result.errors == []
    # the OS heap read was the only foreign touch
    assert len(result.violations) == 1
    assert "eid=os" in result.violations[0]
    assert result.live_labels == ["nicvault"]
    assert "vault" in result.attestations
    report = result.attestations["vault"]
    assert set(report) == {"enclave_sig", "nonce", "device_cert", "signature"}
    bytes.fromhex(report["signature"])
    # window write after the handoff is clean
    assert result.stats["os"]["violations"] == 1
    doc = result.stats_doc()
    assert set(doc) == {"scenario", "seed", "cycles", "per_eid", "cost_units",
                        "checkpoints", "violations", "errors", "attestations",
                        "live_labels", "trace_digest"}


def test_two_runs_are_byte_identical():
    a = run(parse_scenario(lifecycle_text(), loader))
    b = run(parse_scenario(lifecycle_text(), loader))
    assert a.trace == b.trace
    assert a.digest == b.digest
    assert a.stats == b.stats and a.cycles == b.cycles


def test_trace_can_be_disabled_without_changing_the_run():
    a = run(parse_scenario(lifecycle_text(), loader))
    b = run(parse_scenario(lifecycle_text(record_trace=False), loader))
    assert b.trace == TRACE_HEADER + "\n"
    assert b.cycles == a.cycles
    assert b.stats == a.stats


def test_syscall_costs_exactly_two_full_switches():
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault"},
        {"event": "checkpoint", "name": "a"},
        {"event": "syscall", "actor": "vault"},
        {"event": "checkpoint", "name": "b"},
    ])
    result = run(scn)
    model = CostModel()
    switch = model.l1_flush_cycles + model.tlb_flush_cycles
    delta = (result.checkpoints["b"]["cycles"]
             - result.checkpoints["a"]["cycles"])
    assert delta == 2 * switch


def test_scenario_cost_overrides_apply():
    scn = parse(cost_model={"l1_flush_cycles": 5, "tlb_flush_cycles": 2},
                events=[
                    {"event": "install", "package": "vault"},
                    {"event": "setup", "label": "vault"},
                    {"event": "checkpoint", "name": "a"},
                    {"event": "syscall", "actor": "vault"},
                    {"event": "checkpoint", "name": "b"},
                ])
    result = run(scn)
    delta = (result.checkpoints["b"]["cycles"]
             - result.checkpoints["a"]["cycles"])
    assert delta == 2 * (5 + 2)


def test_enclave_access_is_translated_and_can_fault():
    # offset 0x2000 sits in the page-table area, which the address map
    # deliberately leaves unmapped
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault"},
        {"event": "access", "actor": "vault", "op": "read", "address": 0},
        {"event": "access", "actor": "vault", "op": "read",
         "address": 0x2000},
    ])
    result = run(scn)
    assert result.errors == []
    assert result.stats["e1"]["faults"] == 1
    assert "\tfault\ttranslation\t" in result.trace
    assert result.violations == []


def test_corrupt_image_is_caught_at_setup():
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault", "corrupt_image": True},
    ])
    result = run(scn)
    assert [e["error"] for e in result.errors] == ["BadSignature"]
    assert result.live_labels == []


def test_version_override_breaks_the_signature():
    # claiming a different version than the provider signed is just another
    # config forgery
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault", "version_override": 9},
    ])
    result = run(scn)
    assert [e["error"] for e in result.errors] == ["BadSignature"]


def test_failed_events_are_recorded_and_the_run_continues():
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault"},
        {"event": "setup", "label": "vault"},       # already live
        {"event": "access", "actor": "vault", "op": "read", "address": 0},
    ])
    result = run(scn)
    assert len(result.errors) == 1
    assert result.errors[0]["event"] == 2
    assert result.errors[0]["error"] == "ResourceUnavailable"
    assert result.live_labels == ["vault"]
    assert "error:ResourceUnavailable" in result.trace


def test_interrupt_routing_over_scenarios():
    # OS core handles its own interrupt
    r = run(parse(events=[{"event": "interrupt", "core": 0,
                           "class": "external_interrupt"}]))
    assert "\tinterrupt\tlocal\t" in r.trace
    # user-space enclaves hand every trap to the monitor, and the victim is
    # told it was preempted
    r = run(parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault"},
        {"event": "interrupt", "core": 0, "class": "timer_interrupt"},
    ]))
    assert "\tinterrupt\tto_monitor\t" in r.trace
    assert r.stats["e1"]["trap_notifications"] == 1
    # kernel-space enclaves keep everything but external interrupts local
    kernel_text = lambda cls: text_of(packages=["krn"], events=[
        {"event": "install", "package": "krn"},
        {"event": "setup", "label": "krn"},
        {"event": "interrupt", "core": 1, "class": cls},
    ])
    r = run(parse_scenario(kernel_text("timer_interrupt"), loader))
    assert "\tinterrupt\tinternal\t" in r.trace
    r = run(parse_scenario(kernel_text("external_interrupt"), loader))
    assert "\tinterrupt\tto_monitor\t" in r.trace


def test_dma_respects_the_binding():
    base = text_of(peripherals=[{"name": "nic0", "dma": True}],
                   packages=["nicvault"])
    scn = parse_scenario(base, loader)
    doc = json.loads(base)
    doc["events"] = [
        {"event": "dma", "device": "nic0", "op": "write", "address": "0x1F00",
         "size": 16},
    ]
    unbound = run(parse_scenario(json.dumps(doc), loader))
    assert len(unbound.violations) == 1
    assert "origin=dma:nic0" in unbound.violations[0]

    doc["events"] = [
        {"event": "install", "package": "nicvault"},
        {"event": "setup", "label": "nicvault"},
        {"event": "dma", "device": "nic0", "op": "write",
         "relative_to": "nicvault", "area": "heap", "size": 16},
    ]
    bound = run(parse_scenario(json.dumps(doc), loader))
    assert bound.errors == [] and bound.violations == []


def test_handoff_flips_the_window_verdict():
    scn = parse(events=[
        {"event": "install", "package": "vault"},
        {"event": "setup", "label": "vault"},
        {"event": "access", "actor": "os", "op": "write",
         "relative_to": "vault", "area": "window", "size": 8},   # denied
        {"event": "handoff", "region": "vault", "from": "vault", "to": "os"},
        {"event": "access", "actor": "os", "op": "write",
         "relative_to": "vault", "area": "window", "size": 8},   # allowed
    ])
    result = run(scn)
    assert len(result.violations) == 1
    assert result.stats["e1"]["handoffs"] == 1


def test_load_scenario_resolves_package_paths(tmp_path):
    nest = tmp_path / "suite"
    nest.mkdir()
    (nest / "pkgs").mkdir()
    (nest / "pkgs" / "vault.cep").write_bytes(VAULT)
    (nest / "demo.json").write_text(json.dumps({
        "name": "demo",
        "packages": ["pkgs/vault.cep"],
        "events": [{"event": "install", "package": "pkgs/vault.cep"},
                   {"event": "setup", "label": "vault"}],
    }))
    scn = load_scenario(str(nest / "demo.json"))
    result = run(scn)
    assert result.errors == []
    assert result.live_labels == ["vault"]
