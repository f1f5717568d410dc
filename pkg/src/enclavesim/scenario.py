"""Scenario files, the deterministic event loop, and run results.

A scenario is a JSON document driving one simulation: machine shape
(cores, memory, cache geometry), peripheral declarations, references to
signed package files, and an ordered event list. Parsing is total: any
problem raises ScenarioError naming the offending field.

Determinism contract: a run is a pure function of (scenario, seed). The
only randomness consumers are cache victim selection and the monitor's
key material, both drawn from one seeded generator, so two runs of the
same scenario produce byte-identical traces.

Event kinds: install, setup, teardown, access, syscall, interrupt, dma,
handoff, attest, allocate_ways, set_mode, checkpoint.
"""

import dataclasses
import hashlib
import json
import random
import struct

from .bus import (BusTransaction, MemRegion, MemoryArbiterConfig,
                  PeripheralDescriptor, SystemBus)
from .cache import CacheGeometry, PartitionedCache, MODE_BASIC, MODE_STRICT
from .costs import CostModel
from .errors import EnclaveSimError, TranslationFault
from .ids import EID_OS, EID_FIRMWARE, EID_SM, eid_name
from .machine import Machine, TRAP_CLASSES
from .memory import SparseMemory
from .monitor import DEFAULT_PERIPHERAL_PERMS, SecurityMonitor, NvmCounter
from .packaging import Ecosystem, pad_label, peek_package, quick_package
from .crypto import backend
from .trace import Meter

# fixed low memory map: monitor image, firmware, and the zero sink
SM_BASE = 0x0
SM_BYTES = 0x10000
FW_BASE = 0x10000
FW_BYTES = 0x10000
ZERO_BASE = 0x20000
ZERO_BYTES = 0x1000
POOL_BASE = 0x100000
DEFAULT_MEMORY_BYTES = 8 * 1024 * 1024
MMIO_BASE = 0xF0000000

# the certificate chains are anchored independently of the run seed so that
# package files stay valid across seeds
DEFAULT_TRUST_SEED = 0x5EED

EVENT_KINDS = ("install", "setup", "teardown", "access", "syscall",
               "interrupt", "dma", "handoff", "attest", "allocate_ways",
               "set_mode", "checkpoint")

_AREAS = ("region", "code", "state", "heap", "window", "pt")


class ScenarioError(EnclaveSimError):
    pass


@dataclasses.dataclass
class Event:
    kind: str
    args: dict
    index: int

    def where(self):
        return f"events[{self.index}]"


@dataclasses.dataclass
class PeripheralSpec:
    name: str
    mmio_base: int
    mmio_bytes: int = 4096
    dma: bool = False


@dataclasses.dataclass
class Scenario:
    name: str = "unnamed"
    seed: int = 0
    cores: int = 2
    memory_bytes: int = DEFAULT_MEMORY_BYTES
    geometry: CacheGeometry = dataclasses.field(default_factory=CacheGeometry)
    max_ways_per_enclave: int = 8
    cost_overrides: dict = dataclasses.field(default_factory=dict)
    backend: str = "double"
    trust_seed: int = DEFAULT_TRUST_SEED
    record_trace: bool = True
    peripherals: tuple = ()         # of PeripheralSpec
    packages: dict = dataclasses.field(default_factory=dict)   # ref -> bytes
    events: tuple = ()              # of Event

    def labels(self):
        out = {}
        for ref, blob in self.packages.items():
            config, _, _, _ = peek_package(blob)
            out[_text(config.label)] = ref
        return out


def _text(label_bytes):
    return label_bytes.rstrip(b"\x00").decode("utf-8", "replace")


# ---------------------------------------------------------------------------
# parsing

_REQUIRED = object()


def _field(doc, where, name, kinds, default=_REQUIRED):
    if name not in doc:
        if default is _REQUIRED:
            raise ScenarioError(f"{where}.{name}: required field missing")
        return default
    value = doc[name]
    if kinds == "address":
        if isinstance(value, str):
            try:
                return int(value, 0)
            except ValueError:
                raise ScenarioError(f"{where}.{name}: bad address {value!r}") from None
        kinds = int
    if kinds is int and isinstance(value, bool):
        raise ScenarioError(f"{where}.{name}: expected integer, got boolean")
    if not isinstance(value, kinds):
        want = kinds.__name__ if isinstance(kinds, type) else str(kinds)
        raise ScenarioError(f"{where}.{name}: expected {want}, got {type(value).__name__}")
    return value


def _reject_unknown(doc, where, allowed):
    for key in doc:
        if key not in allowed:
            raise ScenarioError(f"{where}.{key}: unknown field")


_EVENT_FIELDS = {
    "install": {"package", "core"},
    "setup": {"label", "core", "corrupt_image", "version_override"},
    "teardown": {"label", "core"},
    "access": {"actor", "op", "address", "size", "data", "relative_to",
               "area", "core", "physical"},
    "syscall": {"actor", "kind", "core"},
    "interrupt": {"core", "class"},
    "dma": {"device", "op", "address", "size", "data", "relative_to", "area"},
    "handoff": {"region", "from", "to", "core"},
    "attest": {"label", "nonce", "core"},
    "allocate_ways": {"label", "count", "core"},
    "set_mode": {"label", "mode", "core"},
    "checkpoint": {"name"},
}


def parse_scenario(text, loader=None):
    """Parse scenario JSON. loader(ref) must return package bytes for each
    entry of "packages"; pass None to require an empty package list."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("top level: expected an object")
    _reject_unknown(doc, "scenario", {
        "name", "seed", "cores", "memory_bytes", "cache", "cost_model",
        "backend", "trust_seed", "record_trace", "peripherals", "packages",
        "events"})

    name = _field(doc, "scenario", "name", str, "unnamed")
    seed = _field(doc, "scenario", "seed", int, 0)
    if not 0 <= seed < 2 ** 64:
        raise ScenarioError("scenario.seed: out of unsigned 64-bit range")
    cores = _field(doc, "scenario", "cores", int, 2)
    if cores < 1:
        raise ScenarioError("scenario.cores: at least one core required")
    memory_bytes = _field(doc, "scenario", "memory_bytes", "address",
                          DEFAULT_MEMORY_BYTES)

    cache_doc = _field(doc, "scenario", "cache", dict, {})
    _reject_unknown(cache_doc, "cache",
                    {"sets", "ways", "line_bytes", "max_ways_per_enclave"})
    try:
        geometry = CacheGeometry(
            _field(cache_doc, "cache", "sets", int, 64),
            _field(cache_doc, "cache", "ways", int, 16),
            _field(cache_doc, "cache", "line_bytes", int, 64))
    except ValueError as exc:
        raise ScenarioError(f"cache: {exc}") from None
    max_ways = _field(cache_doc, "cache", "max_ways_per_enclave", int, 8)

    cost_doc = _field(doc, "scenario", "cost_model", dict, {})
    for key, value in cost_doc.items():
        if key not in CostModel.field_names():
            raise ScenarioError(f"cost_model.{key}: unknown cost constant")
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ScenarioError(f"cost_model.{key}: expected non-negative integer")

    backend_name = _field(doc, "scenario", "backend", str, "double")
    if backend_name not in ("real", "double"):
        raise ScenarioError(f"scenario.backend: unknown backend {backend_name!r}")
    trust_seed = _field(doc, "scenario", "trust_seed", int, DEFAULT_TRUST_SEED)
    record_trace = _field(doc, "scenario", "record_trace", bool, True)

    specs = []
    seen_names = set()
    for i, pdoc in enumerate(_field(doc, "scenario", "peripherals", list, [])):
        where = f"peripherals[{i}]"
        if not isinstance(pdoc, dict):
            raise ScenarioError(f"{where}: expected an object")
        _reject_unknown(pdoc, where, {"name", "mmio_base", "mmio_bytes", "dma"})
        pname = _field(pdoc, where, "name", str)
        if pname in seen_names:
            raise ScenarioError(f"{where}.name: duplicate peripheral {pname!r}")
        seen_names.add(pname)
        specs.append(PeripheralSpec(
            pname,
            _field(pdoc, where, "mmio_base", "address", MMIO_BASE + i * 0x10000),
            _field(pdoc, where, "mmio_bytes", "address", 4096),
            _field(pdoc, where, "dma", bool, False)))

    packages = {}
    for i, ref in enumerate(_field(doc, "scenario", "packages", list, [])):
        if not isinstance(ref, str):
            raise ScenarioError(f"packages[{i}]: expected a path string")
        if ref in packages:
            raise ScenarioError(f"packages[{i}]: duplicate reference {ref!r}")
        if loader is None:
            raise ScenarioError(f"packages[{i}]: no package loader available")
        try:
            packages[ref] = loader(ref)
        except OSError as exc:
            raise ScenarioError(f"packages[{i}]: cannot load {ref!r}: {exc}") from None

    scenario = Scenario(name, seed, cores, memory_bytes, geometry, max_ways,
                        dict(cost_doc), backend_name, trust_seed, record_trace,
                        tuple(specs), packages)

    try:
        known_labels = set(scenario.labels())
    except EnclaveSimError as exc:
        raise ScenarioError(f"packages: undecodable package: {exc}") from None
    actors = known_labels | {"os", "fw"}

    events = []
    for i, edoc in enumerate(_field(doc, "scenario", "events", list, [])):
        where = f"events[{i}]"
        if not isinstance(edoc, dict):
            raise ScenarioError(f"{where}: expected an object")
        kind = _field(edoc, where, "event", str)
        if kind not in EVENT_KINDS:
            raise ScenarioError(f"{where}.event: unknown kind {kind!r}")
        _reject_unknown(edoc, where, _EVENT_FIELDS[kind] | {"event"})
        args = {k: v for k, v in edoc.items() if k != "event"}
        _validate_event(kind, args, where, scenario, actors, cores, seen_names)
        events.append(Event(kind, args, i))
    scenario.events = tuple(events)
    return scenario


def _validate_event(kind, args, where, scenario, actors, cores, devices):
    def need(name, kinds, default=_REQUIRED):
        return _field(args, where, name, kinds, default)

    core = need("core", int, 0) if "core" in _EVENT_FIELDS[kind] else 0
    if not 0 <= core < cores:
        raise ScenarioError(f"{where}.core: core {core} not in machine")

    if kind == "install":
        ref = need("package", str)
        if ref not in scenario.packages:
            raise ScenarioError(f"{where}.package: {ref!r} not in declared packages")
    elif kind in ("setup", "teardown", "attest", "allocate_ways", "set_mode"):
        label = need("label", str)
        if label not in actors or label in ("os", "fw"):
            raise ScenarioError(f"{where}.label: {label!r} is not a declared enclave")
        if kind == "setup":
            need("corrupt_image", bool, False)
            need("version_override", int, None)
        if kind == "attest":
            nonce = need("nonce", str, None)
            if nonce is not None:
                try:
                    raw = bytes.fromhex(nonce)
                except ValueError:
                    raise ScenarioError(f"{where}.nonce: not hex") from None
                if len(raw) != 32:
                    raise ScenarioError(f"{where}.nonce: need 32 bytes")
        if kind == "allocate_ways" and need("count", int) < 1:
            raise ScenarioError(f"{where}.count: must be positive")
        if kind == "set_mode" and need("mode", str) not in (MODE_BASIC, MODE_STRICT):
            raise ScenarioError(f"{where}.mode: expected basic or strict")
    elif kind == "access":
        actor = need("actor", str)
        if actor not in actors:
            raise ScenarioError(f"{where}.actor: unknown actor {actor!r}")
        _validate_xfer(args, where, need)
        rel = need("relative_to", str, None)
        if rel is not None and rel not in actors - {"os", "fw"}:
            raise ScenarioError(f"{where}.relative_to: unknown enclave {rel!r}")
        if need("area", str, "region") not in _AREAS:
            raise ScenarioError(f"{where}.area: expected one of {','.join(_AREAS)}")
    elif kind == "syscall":
        actor = need("actor", str)
        if actor in ("os", "fw") or actor not in actors:
            raise ScenarioError(f"{where}.actor: syscalls come from enclaves")
        need("kind", str, "yield")
    elif kind == "interrupt":
        if need("class", str) not in TRAP_CLASSES:
            raise ScenarioError(
                f"{where}.class: expected one of {','.join(TRAP_CLASSES)}")
    elif kind == "dma":
        device = need("device", str)
        if device not in devices:
            raise ScenarioError(f"{where}.device: unknown device {device!r}")
        _validate_xfer(args, where, need)
        rel = need("relative_to", str, None)
        if rel is not None and rel not in actors - {"os", "fw"}:
            raise ScenarioError(f"{where}.relative_to: unknown enclave {rel!r}")
    elif kind == "handoff":
        for field in ("region", "from", "to"):
            party = need(field, str)
            if field == "region":
                if party not in actors - {"os", "fw"}:
                    raise ScenarioError(f"{where}.region: unknown enclave {party!r}")
            elif party != "os" and party not in actors - {"os", "fw"}:
                raise ScenarioError(f"{where}.{field}: expected os or an enclave")
    elif kind == "checkpoint":
        need("name", str)


def _validate_xfer(args, where, need):
    op = need("op", str)
    if op not in ("read", "write"):
        raise ScenarioError(f"{where}.op: expected read or write")
    need("address", "address", 0)
    size = need("size", int, 8)
    if size not in (1, 2, 4, 8, 16, 32, 64):
        raise ScenarioError(f"{where}.size: power of two up to 64 required")
    data = need("data", str, None)
    if data is not None:
        try:
            raw = bytes.fromhex(data)
        except ValueError:
            raise ScenarioError(f"{where}.data: not hex") from None
        if len(raw) != size:
            raise ScenarioError(f"{where}.data: length must equal size")


def load_scenario(path):
    import os
    base = os.path.dirname(os.path.abspath(path))

    def loader(ref):
        with open(os.path.join(base, ref), "rb") as fh:
            return fh.read()

    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), loader)


# ---------------------------------------------------------------------------
# results

@dataclasses.dataclass
class RunResult:
    scenario_name: str
    seed: int
    cycles: int
    trace: str
    digest: str
    stats: dict             # eid-name -> counter dict
    ledger: dict
    checkpoints: dict
    violations: list
    errors: list
    attestations: dict
    live_labels: list

    def stats_doc(self):
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "cycles": self.cycles,
            "per_eid": self.stats,
            "cost_units": self.ledger,
            "checkpoints": self.checkpoints,
            "violations": self.violations,
            "errors": self.errors,
            "attestations": self.attestations,
            "live_labels": self.live_labels,
            "trace_digest": self.digest,
        }


# ---------------------------------------------------------------------------
# the simulation instance

class Simulation:
    """One self-contained machine plus monitor, driven by events. All state
    is owned by the instance; nothing is shared between instances."""

    def __init__(self, scenario, cost_model=None, nvm=None,
                 skip_pt_verification=False, disable_memory_filter=False,
                 disable_dma_filter=False):
        self.scenario = scenario
        cost = cost_model if cost_model is not None else CostModel()
        if scenario.cost_overrides:
            cost = dataclasses.replace(cost, **scenario.cost_overrides)
        self.cost_model = cost
        self.rng = random.Random(scenario.seed)
        self.meter = Meter(cost, record_trace=scenario.record_trace)

        self.memory = SparseMemory(scenario.memory_bytes)
        zero_region = MemRegion.from_span(ZERO_BASE, ZERO_BYTES)
        arbiter = MemoryArbiterConfig(zero_region)
        arbiter.set_region(EID_SM, MemRegion.from_span(SM_BASE, SM_BYTES))
        arbiter.set_region(EID_FIRMWARE, MemRegion.from_span(FW_BASE, FW_BYTES))

        self.cache = PartitionedCache(scenario.geometry, self.memory, self.rng,
                                      self.meter, scenario.max_ways_per_enclave)
        peripherals = [
            PeripheralDescriptor(s.name, MemRegion.from_span(s.mmio_base, s.mmio_bytes),
                                 DEFAULT_PERIPHERAL_PERMS, dma_capable=s.dma)
            for s in scenario.peripherals]
        self.bus = SystemBus(arbiter, self.cache, self.memory, self.meter,
                             peripherals,
                             disable_memory_filter=disable_memory_filter,
                             disable_dma_filter=disable_dma_filter)
        self.machine = Machine(scenario.cores, self.meter)

        schemes = backend(scenario.backend)
        self.ecosystem = Ecosystem.create(schemes[0],
                                          random.Random(scenario.trust_seed))
        self.monitor = SecurityMonitor(
            self.bus, self.cache, self.machine, self.meter, self.rng, schemes,
            self.ecosystem, nvm=nvm, pool_base=POOL_BASE,
            skip_pt_verification=skip_pt_verification)

        self._booted = False
        self._label_to_ref = scenario.labels()
        self.checkpoints = {}
        self.errors = []
        self.attestations = {}

    # -- plumbing ---------------------------------------------------------

    def boot(self):
        """Deferred until the first event so an empty scenario stays at
        zero cycles with an empty trace."""
        if not self._booted:
            self.monitor.boot(SM_BASE)
            self._booted = True

    def _eid_of(self, actor):
        if actor == "os":
            return EID_OS
        if actor == "fw":
            return EID_FIRMWARE
        eid = self.monitor.label_to_eid.get(pad_label(actor))
        if eid is None:
            raise EnclaveSimError(f"enclave {actor!r} is not live")
        return eid

    def _runtime_of(self, label_text):
        return self.monitor.live[self._eid_of(label_text)]

    def _place_core(self, event, eid):
        """Pick the core for an actor, switching it over if needed (full
        monitor-mediated switch)."""
        core = event.args.get("core")
        if core is None:
            running = self.machine.cores_running(eid)
            core = running[0] if running else 0
        if self.machine.core(core).eid != eid:
            self.monitor.context_switch(core, eid, "scheduled in")
        return core

    def _sm_call(self, core, fn, *args, exit_to=None):
        """Management-call discipline: trap the calling core into the
        monitor, run the call, and exit to where the result says."""
        self.machine.enter_monitor(core, "management call")
        caller = self.machine.core(core).prev_eid
        try:
            result = fn(*args)
        except BaseException:
            self._exit_to(core, caller)
            raise
        self._exit_to(core, caller if exit_to is None else exit_to)
        return result

    def _exit_to(self, core, target):
        live = self.monitor.live
        if target not in (EID_OS, EID_FIRMWARE) and target not in live:
            target = EID_OS
        self.machine.exit_monitor(core, target)

    # -- event dispatch -----------------------------------------------------

    def run_events(self):
        for event in self.scenario.events:
            self.execute(event)
        return self.result()

    def execute(self, event):
        self.boot()
        handler = getattr(self, f"_ev_{event.kind}")
        try:
            handler(event)
        except EnclaveSimError as exc:
            self.errors.append({"event": event.index, "kind": event.kind,
                                "error": type(exc).__name__, "detail": str(exc)})
            self.meter.emit(EID_SM, event.kind, f"error:{type(exc).__name__}",
                            str(exc))
        # every event ends at a monitor scheduling point
        self.monitor.handle_violations()

    # each handler mirrors one scenario event kind

    def _ev_install(self, event):
        blob = self.scenario.packages[event.args["package"]]
        self._sm_call(event.args.get("core", 0), self.monitor.install, blob)

    def _ev_setup(self, event):
        label_text = event.args["label"]
        ref = self._label_to_ref[label_text]
        config, binary, _, _ = peek_package(self.scenario.packages[ref])
        if event.args.get("version_override") is not None:
            config = dataclasses.replace(config,
                                         version=event.args["version_override"])
        image = bytearray(binary)
        if event.args.get("corrupt_image"):
            image[0] ^= 0x01
        core = event.args.get("core", 0)
        self.machine.enter_monitor(core, "management call")
        caller = self.machine.core(core).prev_eid
        try:
            eid = self.monitor.setup(config.label, bytes(image), config, core)
        except BaseException:
            self._exit_to(core, caller)
            raise
        target = eid if config.enclave_type != "kernel" else caller
        self._exit_to(core, target)

    def _ev_teardown(self, event):
        eid = self._eid_of(event.args["label"])
        self._sm_call(event.args.get("core", 0), self.monitor.teardown, eid)

    def _ev_access(self, event):
        args = event.args
        eid = self._eid_of(args["actor"])
        core = self._place_core(event, eid)
        address = self._resolve_address(args)
        size = args.get("size", 8)
        op = args["op"]
        data = bytes.fromhex(args["data"]) if args.get("data") else b""
        if op == "write" and not data:
            data = bytes((address + i) & 0xFF for i in range(size))

        runtime = self.monitor.live.get(eid)
        virtual = (runtime is not None
                   and runtime.config.enclave_type == "user"
                   and not args.get("physical", False)
                   and args.get("relative_to") is None)
        if virtual:
            try:
                address = self.monitor.translate(
                    eid, address, "w" if op == "write" else "r")
            except TranslationFault as exc:
                self.meter.bump(eid, "faults")
                self.meter.emit(eid, "fault", "translation", str(exc))
                return
        txn = BusTransaction(eid, op, address, size, data, ("core", core))
        self.bus.route(txn)

    def _ev_syscall(self, event):
        eid = self._eid_of(event.args["actor"])
        core = self._place_core(event, eid)
        self.meter.bump(eid, "syscalls")
        self.meter.emit(eid, "syscall", event.args.get("kind", "yield"),
                        f"core{core}")
        self.monitor.context_switch(core, EID_OS, "syscall")
        self.monitor.context_switch(core, eid, "syscall return")

    def _ev_interrupt(self, event):
        core_id = event.args.get("core", 0)
        cls = event.args["class"]
        state = self.machine.raise_interrupt(core_id, cls)
        if state == "deferred":
            return
        core = self.machine.core(core_id)
        eid = core.eid
        if eid == EID_OS or eid == EID_FIRMWARE:
            self.meter.emit(eid, "interrupt", "local", f"core{core_id} {cls}")
            return
        if self.machine.trap_route(core_id, cls) == "monitor":
            runtime = self.monitor.live.get(eid)
            if runtime is not None and runtime.config.enclave_type == "user":
                # the monitor tells the enclave it was preempted; a privileged
                # interrupt storm is thereby visible to the victim
                self.meter.bump(eid, "trap_notifications")
            self.meter.emit(eid, "interrupt", "to_monitor", f"core{core_id} {cls}")
            self.machine.enter_monitor(core_id, f"interrupt {cls}")
            self._exit_to(core_id, EID_OS)
        else:
            self.meter.emit(eid, "interrupt", "internal", f"core{core_id} {cls}")

    def _ev_dma(self, event):
        args = event.args
        device = self.bus.peripherals[args["device"]]
        address = self._resolve_address(args)
        size = args.get("size", 64)
        op = args["op"]
        data = bytes.fromhex(args["data"]) if args.get("data") else b""
        if op == "write" and not data:
            data = bytes((address + i) & 0xFF for i in range(size))
        eid = device.bound_eid if device.bound_eid is not None else EID_OS
        txn = BusTransaction(eid, op, address, size, data,
                             ("dma", device.name))
        self.bus.route(txn)

    def _ev_handoff(self, event):
        args = event.args
        window_eid = self._eid_of(args["region"])
        from_eid = EID_OS if args["from"] == "os" else self._eid_of(args["from"])
        to_eid = EID_OS if args["to"] == "os" else self._eid_of(args["to"])
        self._sm_call(event.args.get("core", 0),
                      self.monitor.shared_memory_handoff,
                      window_eid, from_eid, to_eid)

    def _ev_attest(self, event):
        label_text = event.args["label"]
        eid = self._eid_of(label_text)
        nonce_hex = event.args.get("nonce")
        if nonce_hex:
            nonce = bytes.fromhex(nonce_hex)
        else:
            nonce = hashlib.sha256(
                b"attest-nonce" + pad_label(label_text)
                + struct.pack("<I", event.index)).digest()
        report = self._sm_call(event.args.get("core", 0),
                               self.monitor.attest, eid, nonce)
        self.attestations[label_text] = report.to_json_dict()

    def _ev_allocate_ways(self, event):
        eid = self._eid_of(event.args["label"])
        self._sm_call(event.args.get("core", 0), self.cache.allocate_ways,
                      EID_SM, eid, event.args["count"])

    def _ev_set_mode(self, event):
        eid = self._eid_of(event.args["label"])
        self._sm_call(event.args.get("core", 0), self.cache.set_mode,
                      EID_SM, eid, event.args["mode"])

    def _ev_checkpoint(self, event):
        name = event.args["name"]
        self.checkpoints[name] = {
            "cycles": self.meter.cycles,
            "stats": {eid_name(e): dict(c) for e, c in self.meter.stats.items()},
            "cost_units": dict(self.meter.ledger),
        }
        self.meter.emit(EID_SM, "checkpoint", "ok", name)

    def _resolve_address(self, args):
        address = args.get("address", 0)
        if isinstance(address, str):
            address = int(address, 0)
        rel = args.get("relative_to")
        if rel is not None:
            layout = self._runtime_of(rel).layout
            base = {
                "region": layout.region_base,
                "code": layout.code_base,
                "state": layout.state_base,
                "heap": layout.heap_base,
                "window": layout.window_base,
                "pt": layout.pt_base,
            }[args.get("area", "region")]
            address += base
        return address

    # -- results ---------------------------------------------------------------

    def result(self):
        trace = self.meter.render_trace()
        live_labels = sorted(_text(r.label) for r in self.monitor.live.values())
        return RunResult(
            scenario_name=self.scenario.name,
            seed=self.scenario.seed,
            cycles=self.meter.cycles,
            trace=trace,
            digest=hashlib.sha256(trace.encode()).hexdigest(),
            stats={eid_name(e): dict(c) for e, c in sorted(self.meter.stats.items())},
            ledger=dict(self.meter.ledger),
            checkpoints=dict(self.checkpoints),
            violations=[v.describe() for v in self.monitor.violation_log],
            errors=list(self.errors),
            attestations=dict(self.attestations),
            live_labels=live_labels)


def run(scenario, cost_model=None, **knobs):
    """Execute a scenario start to finish. Returns a RunResult."""
    return Simulation(scenario, cost_model, **knobs).run_events()


def make_package_for(scenario_or_trust_seed, label_text, **kw):
    """Build a package signed under the trust anchor a scenario will use."""
    trust_seed = (scenario_or_trust_seed.trust_seed
                  if isinstance(scenario_or_trust_seed, Scenario)
                  else scenario_or_trust_seed)
    schemes = backend(kw.pop("backend", "double"))
    eco = Ecosystem.create(schemes[0], random.Random(trust_seed))
    pkg, config, binary = quick_package(schemes[0], eco, label_text, **kw)
    return pkg
