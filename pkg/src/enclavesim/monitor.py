"""The security monitor: enclave lifecycle, sealing, attestation, paging checks.

The monitor is the only software the hardware trusts. It runs under its own
reserved identity, so the bus lets it configure the arbiter, the cache
partition directory and the identity registers. Everything it manages is
expressed through those primitives; the monitor itself adds bookkeeping, key
handling and ordering, not new hardware powers.

Calling convention: the management functions assume the calling core is
already in monitor context (the harness performs the trap entry and the
matching exit, so switch costs land exactly once). Functions that move OTHER
cores (detaching cores to a kernel-space enclave, rebooting a torn-down
enclave's cores) perform those full switches internally.

Monitor software is modeled as bookkeeping: it costs no cycles beyond the
flushes and switches it triggers. Data-plane copies it performs (loading an
image, zeroing a region) go straight to backing memory after the relevant
cache purge.
"""

import bisect
import dataclasses
import json
import hashlib
import struct

from . import paging
from .bus import (BusTransaction, MemRegion, WINDOW_ENCLAVE, WINDOW_OS,
                  perm_bits, round_up_pow2)
from .cache import MODE_BASIC, MODE_STRICT
from .errors import EnclaveSimError, TranslationFault
from .ids import EID_OS, EID_FIRMWARE, EID_SM, POOL_IDS, eid_name
from .machine import TRAP_CLASSES
from .packaging import (STATE_BYTES, SealedBlob, seal, unseal,
                        serialize_config, _sign_input, verify_package,
                        AttestationReport, BadSignature, Certificate,
                        EnclaveConfig, RollbackDetected)

MIN_REGION_USER = 32 * 1024
MIN_REGION_OTHER = 8 * 1024
WINDOW_BYTES = 4096
DEFAULT_PERIPHERAL_PERMS = perm_bits(EID_OS, read=True, write=True)

KERNEL_DELEGATED = ("external_interrupt",)


class UnknownLabel(EnclaveSimError):
    pass


class DuplicateLabel(EnclaveSimError):
    pass


class NoFreeEid(EnclaveSimError):
    pass


class ResourceUnavailable(EnclaveSimError):
    pass


class VersionRollback(EnclaveSimError):
    pass


class BadPageTables(EnclaveSimError):
    pass


class NotLive(EnclaveSimError):
    pass


class NotOwner(EnclaveSimError):
    pass


# ---------------------------------------------------------------------------
# persistent enclave state (the 64-byte record kept in the region)

KEY_RECORD_BYTES = 17      # key id u8 + 16-byte key
MAX_STATE_KEYS = (STATE_BYTES - 16 - 8 - 1) // KEY_RECORD_BYTES


@dataclasses.dataclass
class EnclaveState:
    k_com: bytes                    # communication key, provisioned at first setup
    counter: int                    # mirrors the monitor-held rollback counter
    keys: tuple = ()                # of (key_id, 16-byte key)

    def encode(self):
        if len(self.keys) > MAX_STATE_KEYS:
            raise ValueError(f"at most {MAX_STATE_KEYS} stored keys fit")
        out = bytearray()
        out += self.k_com
        out += struct.pack("<Q", self.counter)
        out += struct.pack("<B", len(self.keys))
        for key_id, key in self.keys:
            out += struct.pack("<B", key_id) + key
        if len(out) > STATE_BYTES:
            raise ValueError("state overflows its reserved area")
        return bytes(out.ljust(STATE_BYTES, b"\x00"))

    @classmethod
    def decode(cls, data):
        if len(data) != STATE_BYTES:
            raise ValueError(f"state must be exactly {STATE_BYTES} bytes")
        k_com = bytes(data[:16])
        counter = struct.unpack_from("<Q", data, 16)[0]
        n = data[24]
        if n > MAX_STATE_KEYS:
            raise ValueError("stored key count out of range")
        keys = []
        pos = 25
        for _ in range(n):
            keys.append((data[pos], bytes(data[pos + 1:pos + 17])))
            pos += KEY_RECORD_BYTES
        return cls(k_com, counter, tuple(keys))


# ---------------------------------------------------------------------------
# layout inside a region

@dataclasses.dataclass(frozen=True)
class EnclaveLayout:
    region_base: int
    region_size: int
    code_base: int
    code_bytes: int
    pt_base: int            # 0 when the type has no page tables
    pt_bytes: int
    state_base: int
    heap_base: int
    window_base: int

    @classmethod
    def plan(cls, region_base, region_size, binary_len, enclave_type):
        page = paging.PAGE_BYTES
        code_bytes = max(page, -(-binary_len // page) * page)
        cursor = region_base + code_bytes
        if enclave_type == "user":
            pt_base = cursor
            pt_bytes = paging.table_area_bytes(region_size)
            cursor += pt_bytes
        else:
            pt_base = pt_bytes = 0
        state_base = cursor
        heap_base = state_base + STATE_BYTES
        window_base = region_base + region_size - WINDOW_BYTES
        if heap_base > window_base:
            raise ResourceUnavailable(
                f"layout needs {heap_base - region_base} bytes before the "
                f"window at offset {window_base - region_base}")
        return cls(region_base, region_size, region_base, code_bytes,
                   pt_base, pt_bytes, state_base, heap_base, window_base)

    @property
    def region(self):
        return MemRegion.from_span(self.region_base, self.region_size)

    @property
    def window_region(self):
        return MemRegion.from_span(self.window_base, WINDOW_BYTES)

    def pt_area(self):
        return (self.pt_base, self.pt_base + self.pt_bytes) if self.pt_bytes else None


# ---------------------------------------------------------------------------
# per-label record and per-eid runtime record

@dataclasses.dataclass
class EnclaveMeta:
    label: bytes
    config: EnclaveConfig
    binary: bytes
    package_sig: bytes
    cert: object
    max_version_setup: int = -1     # highest version ever brought live
    rollback_counter: int = 0       # expected counter of the next unseal
    sealed_state: SealedBlob = None


@dataclasses.dataclass
class RuntimeInfo:
    eid: int
    label: bytes
    config: EnclaveConfig
    layout: EnclaveLayout
    cores: tuple = ()               # detached cores (kernel-space only)
    peripherals: tuple = ()
    entered: bool = False


class NvmCounter:
    """Monotonic counter in tamper-resistant storage. In-memory by default;
    give a path to persist across CLI invocations (decimal text)."""

    def __init__(self, path=None, initial=0):
        self.path = path
        self._value = initial
        if path is not None:
            try:
                with open(path, "r", encoding="ascii") as fh:
                    self._value = int(fh.read().strip() or "0")
            except FileNotFoundError:
                pass

    def read(self):
        return self._value

    def store(self, value):
        if value < self._value:
            raise ValueError("NVM counter only moves forward")
        self._value = value
        if self.path is not None:
            with open(self.path, "w", encoding="ascii") as fh:
                fh.write(str(value))


# ---------------------------------------------------------------------------

class SecurityMonitor:
    def __init__(self, bus, cache, machine, meter, rng, schemes, ecosystem,
                 nvm=None, pool_base=0x100000, skip_pt_verification=False):
        self.bus = bus
        self.cache = cache
        self.machine = machine
        self.meter = meter
        self.rng = rng
        self.sig_scheme, self.aead = schemes
        self.ecosystem = ecosystem
        self.nvm = nvm if nvm is not None else NvmCounter()
        self.pool_base = pool_base
        # negative-control knob: attack scenarios flip this to show that
        # verification, not luck, is what stops table escapes
        self.skip_pt_verification = skip_pt_verification

        self.sm_secret = rng.randbytes(32)
        self.installed = {}         # label bytes -> EnclaveMeta
        self.live = {}              # eid -> RuntimeInfo
        self.label_to_eid = {}
        self._free_eids = list(POOL_IDS)
        self.violation_log = []

    # -- key derivation ------------------------------------------------------

    def _derive(self, purpose, label=b""):
        return hashlib.sha256(b"|".join((purpose, self.sm_secret, label))).digest()

    def sealing_key(self, label):
        return self._derive(b"seal", label)[:16]

    def comms_key(self, label):
        return self._derive(b"kcom", label)[:16]

    # -- boot ------------------------------------------------------------------

    def boot(self, sm_region_base=0):
        """Cores come out of reset in monitor context. Install the trap
        vector on each, then hand every core to the OS."""
        for core in self.machine.cores:
            self.machine.set_trap_vector(core.core_id, sm_region_base)
            self.machine.exit_monitor(core.core_id, EID_OS)
        self.meter.emit(EID_SM, "boot", "ok",
                        f"{len(self.machine.cores)} cores to os")

    # -- install ---------------------------------------------------------------

    def install(self, pkg_bytes):
        """Validate a package end to end and register it under its label.
        Returns the label. Re-install with a different version is allowed
        (the setup-time version floor still applies); an identical version
        or a live label is refused."""
        config, binary, cert, sig = verify_package(
            pkg_bytes, self.ecosystem.provider_root_public, self.sig_scheme)
        label = config.label
        old = self.installed.get(label)
        if old is not None:
            if label in self.label_to_eid:
                raise DuplicateLabel(f"{_label_text(label)} is live")
            if old.config.version == config.version:
                raise DuplicateLabel(
                    f"{_label_text(label)} v{config.version} already installed")
        meta = EnclaveMeta(label, config, binary, sig, cert)
        if old is not None:
            # security state outlives the installed bits
            meta.max_version_setup = old.max_version_setup
            meta.rollback_counter = old.rollback_counter
            meta.sealed_state = old.sealed_state
        self.installed[label] = meta
        self.meter.emit(EID_SM, "install", "ok",
                        f"label={_label_text(label)};version={config.version}")
        return label

    # -- sealed-state custody (the OS stores blobs at rest) ---------------------

    def export_sealed_state(self, label):
        meta = self._meta(label)
        return meta.sealed_state.encode() if meta.sealed_state else None

    def provide_sealed_state(self, label, blob_bytes):
        """The OS hands back what it claims is the latest sealed state."""
        self._meta(label).sealed_state = SealedBlob.decode(blob_bytes)

    def reset_rollback_counter(self, label, value):
        """Negative-control knob: models wiped or re-flashed counter storage.
        With the counter gone, an old blob becomes indistinguishable from the
        newest one; attack scenarios use this as their leak control."""
        self._meta(label).rollback_counter = value

    def _meta(self, label):
        if label not in self.installed:
            raise UnknownLabel(_label_text(label))
        return self.installed[label]

    # -- setup -------------------------------------------------------------------

    def setup(self, label, loaded_image, cfg, core_id=0):
        """Bring an installed enclave live. Returns the assigned eid; the
        caller exits the calling core into it (user/sub types) or back to
        the OS (kernel type, whose detached cores are switched here)."""
        meta = self._meta(label)
        if label in self.label_to_eid:
            raise ResourceUnavailable(f"{_label_text(label)} is already live")
        if cfg.version < meta.max_version_setup:
            raise VersionRollback(
                f"version {cfg.version} below floor {meta.max_version_setup}")
        if not self._free_eids:
            raise NoFreeEid("identity pool exhausted")
        eid = self._free_eids.pop(0)

        undo = [lambda: bisect.insort(self._free_eids, eid)]
        try:
            # -- region: place, program the arbiter, purge stale cached copies
            min_region = MIN_REGION_USER if cfg.enclave_type == "user" else MIN_REGION_OTHER
            region_size = round_up_pow2(max(cfg.memory_bytes, min_region))
            region = self._place_region(region_size)
            self.bus.program_region(EID_SM, eid, region)
            undo.append(lambda: self.bus.clear_region(EID_SM, eid))
            self.cache.flush_range_all_owners(EID_SM, region)

            # -- re-verify the signature over what is actually in memory.
            # The install-time check covered the package file; this one covers
            # the image the OS claims to have loaded, closing the copy gap.
            if not self.sig_scheme.verify(
                    meta.cert.subject_key,
                    _sign_input(serialize_config(cfg), loaded_image),
                    meta.package_sig):
                raise BadSignature("loaded image does not match the package")

            # -- lay out and populate the region
            layout = EnclaveLayout.plan(region.base, region.size,
                                        len(loaded_image), cfg.enclave_type)
            self.bus.memory.zero(region.base, region.size)
            self.bus.memory.write(layout.code_base, loaded_image)
            if cfg.enclave_type == "user":
                paging.materialize_linear_tables(
                    self.bus.memory, layout.pt_base, region.base, region.size,
                    skip_ranges=[layout.pt_area()])
            self.bus.program_window(EID_SM, eid, layout.window_region,
                                    WINDOW_ENCLAVE)

            # -- peripherals
            granted = []
            undo.append(lambda: self._return_peripherals(granted))
            for name, exclusive in cfg.peripherals:
                if name not in self.bus.peripherals:
                    raise ResourceUnavailable(f"no peripheral named {name}")
                self.bus.sanitize_peripheral(EID_SM, name)
                perms = perm_bits(eid, read=True, write=True)
                if not exclusive:
                    perms |= DEFAULT_PERIPHERAL_PERMS
                self.bus.set_peripheral_perms(EID_SM, name, perms)
                if self.bus.peripherals[name].dma_capable:
                    self.bus.bind_dma(EID_SM, name, region, eid)
                granted.append(name)

            # -- cache partition
            if cfg.cache_mode != "none" and cfg.cache_ways:
                self.cache.allocate_ways(EID_SM, eid, cfg.cache_ways)
                undo.append(lambda: self.cache.release_ways(EID_SM, eid))
            if cfg.cache_mode == "strict":
                self.cache.set_mode(EID_SM, eid, MODE_STRICT)
                undo.append(lambda: self.cache.set_mode(EID_SM, eid, MODE_BASIC))

            # -- persistent state into the region
            state = self._load_state(meta)
            self.bus.memory.write(layout.state_base, state.encode())

            # -- traps
            delegated = TRAP_CLASSES if cfg.enclave_type != "kernel" else KERNEL_DELEGATED
            self.machine.set_delegation(eid, delegated)
            undo.append(lambda: self.machine.clear_delegation(eid))

            runtime = RuntimeInfo(eid, label, cfg, layout,
                                  peripherals=tuple(n for n, _ in cfg.peripherals))
            self.live[eid] = runtime
            self.label_to_eid[label] = eid
            undo.append(lambda: (self.live.pop(eid, None),
                                 self.label_to_eid.pop(label, None)))

            if cfg.enclave_type == "user":
                self.verify_page_tables(eid)

            # -- cores for kernel-space enclaves: full switch each
            if cfg.enclave_type == "kernel":
                available = [c for c in self.machine.cores_running(EID_OS)
                             if c != core_id]
                if len(available) < cfg.cores:
                    raise ResourceUnavailable(
                        f"need {cfg.cores} OS cores, {len(available)} available")
                chosen = tuple(available[:cfg.cores])
                for c in chosen:
                    self.machine.context_switch(c, eid, "detach to enclave")
                runtime.cores = chosen

        except BaseException:
            for thunk in reversed(undo):
                thunk()
            raise

        meta.max_version_setup = max(meta.max_version_setup, cfg.version)
        self.meter.bump(eid, "setups")
        self.meter.emit(EID_SM, "setup", "ok",
                        f"label={_label_text(label)};eid={eid_name(eid)};"
                        f"region={region.base:#x}+{region.size:#x}")
        return eid

    def _load_state(self, meta):
        if meta.sealed_state is None:
            return EnclaveState(self.comms_key(meta.label), meta.rollback_counter)
        plain = unseal(self.aead, self.sealing_key(meta.label),
                       meta.sealed_state, meta.rollback_counter, meta.label)
        state = EnclaveState.decode(plain)
        if state.counter != meta.rollback_counter:
            raise RollbackDetected("state counter does not match storage")
        return state

    def _place_region(self, size):
        """First fit, size-aligned, above the reserved low map."""
        taken = [self.bus.arbiter.zero_region]
        taken += list(self.bus.arbiter.regions.values())
        limit = self.bus.memory.size
        base = (self.pool_base + size - 1) & ~(size - 1)
        while base + size <= limit:
            candidate = MemRegion.from_span(base, size)
            clash = next((t for t in taken if candidate.overlaps(t)), None)
            if clash is None:
                return candidate
            base = (clash.end + size - 1) & ~(size - 1)
        raise ResourceUnavailable(f"no {size:#x}-byte window left in memory")

    def _return_peripherals(self, names):
        for name in names:
            self.bus.sanitize_peripheral(EID_SM, name)
            self.bus.set_peripheral_perms(EID_SM, name, DEFAULT_PERIPHERAL_PERMS)

    # -- teardown ------------------------------------------------------------------

    def teardown(self, eid):
        """Retire a live enclave: capture state, then scrub every resource
        before anything returns to the OS pool."""
        runtime = self._runtime(eid)
        meta = self.installed[runtime.label]
        layout = runtime.layout

        # dirty lines (including the state area) must land in memory first
        self.cache.flush_enclave_lines(EID_SM, eid)

        raw = self.bus.memory.read(layout.state_base, STATE_BYTES)
        try:
            state = EnclaveState.decode(raw)
        except ValueError:
            # the enclave corrupted its own record; reseal a fresh one so the
            # label stays usable
            state = EnclaveState(self.comms_key(runtime.label), meta.rollback_counter)
        state.counter = meta.rollback_counter + 1
        meta.rollback_counter = state.counter
        meta.sealed_state = seal(self.aead, self.sealing_key(runtime.label),
                                 state.encode(), state.counter, runtime.label)

        self.bus.memory.zero(layout.region_base, layout.region_size)

        self.cache.release_ways(EID_SM, eid)
        self.cache.set_mode(EID_SM, eid, MODE_BASIC)
        self.bus.clear_region(EID_SM, eid)
        self._return_peripherals(runtime.peripherals)
        for core in self.machine.cores_running(eid):
            self.machine.context_switch(core, EID_OS, "teardown reboot")
        self.machine.clear_delegation(eid)

        self.live.pop(eid)
        self.label_to_eid.pop(runtime.label)
        bisect.insort(self._free_eids, eid)
        self.meter.bump(eid, "teardowns")
        self.meter.emit(EID_SM, "teardown", "ok",
                        f"label={_label_text(runtime.label)};eid={eid_name(eid)};"
                        f"counter={state.counter}")
        return runtime.label

    def _runtime(self, eid):
        if eid not in self.live:
            raise NotLive(f"{eid_name(eid)} is not a live enclave")
        return self.live[eid]

    # -- context switching -----------------------------------------------------------

    def context_switch(self, core_id, target_eid, reason=""):
        """Full monitor-mediated switch of one core. No-op (and no cost)
        when the core already runs the target identity."""
        if target_eid not in (EID_OS, EID_FIRMWARE) and target_eid not in self.live:
            raise NotLive(f"switch target {eid_name(target_eid)} is not live")
        core = self.machine.core(core_id)
        if core.eid == target_eid:
            return []
        deferred = self.machine.context_switch(core_id, target_eid, reason)
        if target_eid in self.live:
            self.live[target_eid].entered = True
        return deferred

    # -- paging -------------------------------------------------------------------------

    def _read_pte(self, address):
        return struct.unpack("<I", self.bus.memory.read(address, 4))[0]

    def verify_page_tables(self, eid):
        """Walk the enclave's tables with monitor-private loads and reject
        any pointer or mapping that leaves the enclave's own region (or
        touches the table area itself)."""
        if self.skip_pt_verification:
            return
        runtime = self._runtime(eid)
        if runtime.config.enclave_type != "user":
            return
        layout = runtime.layout
        pt_lo, pt_hi = layout.pt_area()
        region = layout.region
        for vpn1 in range(paging.ENTRIES_PER_TABLE):
            root_entry = self._read_pte(layout.pt_base + vpn1 * paging.PTE_BYTES)
            if not root_entry & paging.PTE_VALID:
                continue
            l2_base = paging.pte_ppn(root_entry) << paging.PAGE_SHIFT
            if not (pt_lo < l2_base < pt_hi) or l2_base % paging.PAGE_BYTES:
                raise BadPageTables(
                    f"second-level table at {l2_base:#x} escapes the table area")
            for vpn0 in range(paging.ENTRIES_PER_TABLE):
                entry = self._read_pte(l2_base + vpn0 * paging.PTE_BYTES)
                if not entry & paging.PTE_VALID:
                    continue
                pa = paging.pte_ppn(entry) << paging.PAGE_SHIFT
                if not region.contains_range(pa, paging.PAGE_BYTES):
                    raise BadPageTables(f"mapping to {pa:#x} leaves the region")
                if pt_lo <= pa < pt_hi:
                    raise BadPageTables(f"mapping to {pa:#x} targets the tables")

    def add_page_mapping(self, eid, pte):
        """Install one leaf entry on behalf of a live user-space enclave.
        pte is (virtual_address, entry_value). The same bounds that setup
        verification enforces apply here, before anything is written."""
        runtime = self._runtime(eid)
        if runtime.config.enclave_type != "user":
            raise BadPageTables("only user-space enclaves have monitor-managed tables")
        va, value = pte
        layout = runtime.layout
        pt_lo, pt_hi = layout.pt_area()
        vpn1, vpn0, _ = paging.split_va(va)
        if value & paging.PTE_VALID and not self.skip_pt_verification:
            pa = paging.pte_ppn(value) << paging.PAGE_SHIFT
            if not layout.region.contains_range(pa, paging.PAGE_BYTES):
                raise BadPageTables(f"mapping to {pa:#x} leaves the region")
            if pt_lo <= pa < pt_hi:
                raise BadPageTables(f"mapping to {pa:#x} targets the tables")
        root_entry = self._read_pte(layout.pt_base + vpn1 * paging.PTE_BYTES)
        if not root_entry & paging.PTE_VALID:
            raise BadPageTables(f"no second-level table covers {va:#x}")
        l2_base = paging.pte_ppn(root_entry) << paging.PAGE_SHIFT
        self.bus.memory.write(l2_base + vpn0 * paging.PTE_BYTES,
                              struct.pack("<I", value & 0xFFFFFFFF))
        for core in self.machine.cores_running(eid):
            self.machine.flush_tlb(core, "mapping update")
        self.verify_page_tables(eid)
        self.meter.emit(EID_SM, "map", "ok",
                        f"eid={eid_name(eid)};va={va:#x};pte={value:#x}")

    def translate(self, eid, va, perm):
        """Hardware-walker model: loads go over the bus tagged with the
        enclave's own identity, so a table that points outside the region
        reads zeros and faults instead of leaking."""
        runtime = self._runtime(eid)
        if runtime.config.enclave_type != "user":
            return va

        def load(pa):
            if pa % 4 or not self.bus.memory.check_range(pa, 4):
                raise TranslationFault(f"walker load at {pa:#x} is invalid")
            _, data, _ = self.bus.route(BusTransaction(eid, "read", pa, 4))
            return struct.unpack("<I", data)[0]

        return paging.walk(load, runtime.layout.pt_base, va, perm)

    # -- shared-window handoff ---------------------------------------------------------

    def shared_memory_handoff(self, window_eid, from_eid, to_eid):
        """Flip ownership of an enclave's communication window between the
        enclave and the OS. Only the current owner may hand it off."""
        runtime = self._runtime(window_eid)
        owner = self.bus.arbiter.window_owner(window_eid)
        expected_from = window_eid if owner == WINDOW_ENCLAVE else EID_OS
        if from_eid != expected_from:
            raise NotOwner(
                f"window of {eid_name(window_eid)} is owned by "
                f"{eid_name(expected_from)}, not {eid_name(from_eid)}")
        if to_eid == window_eid:
            new_owner = WINDOW_ENCLAVE
        elif to_eid == EID_OS:
            new_owner = WINDOW_OS
        else:
            raise NotOwner(f"window can only go to its enclave or the OS")
        if from_eid == to_eid:
            return
        self.cache.flush_range_all_owners(EID_SM, runtime.layout.window_region)
        self.bus.set_window_owner(EID_SM, window_eid, new_owner)
        self.meter.bump(window_eid, "handoffs")
        self.meter.emit(EID_SM, "handoff", "ok",
                        f"window={eid_name(window_eid)};to={eid_name(to_eid)}")

    # -- attestation ----------------------------------------------------------------------

    def attest(self, eid, nonce):
        """Produce a report binding the live enclave's measurement (its
        package signature) to the verifier's nonce under the device key."""
        runtime = self._runtime(eid)
        if len(nonce) != 32:
            raise ValueError("attestation nonce must be 32 bytes")
        meta = self.installed[runtime.label]
        signature = self.sig_scheme.sign(self.ecosystem.device_private,
                                         meta.package_sig + nonce)
        self.meter.bump(eid, "attestations")
        self.meter.emit(EID_SM, "attest", "ok",
                        f"eid={eid_name(eid)};nonce={nonce[:4].hex()}..")
        return AttestationReport(meta.package_sig, bytes(nonce),
                                 self.ecosystem.device_cert, signature)

    # -- violations -------------------------------------------------------------------------

    def handle_violations(self):
        """Drain the arbiter's violation queue. Called at every monitor
        scheduling point; records are logged, never fatal (the hardware
        already neutralized the access)."""
        drained = self.meter.drain_violations()
        for record in drained:
            self.violation_log.append(record)
            self.meter.bump(record.eid, "violations_handled")
            self.meter.emit(EID_SM, "violation", "handled", record.describe())
        return drained

    # -- monitor state at rest -----------------------------------------------------------------

    def seal_sm_state(self):
        """Seal all per-label security state under the monitor's own key,
        bound to the monotonic NVM counter. Live enclaves must be torn down
        first; their state lives in their regions, not here."""
        if self.live:
            raise ResourceUnavailable("live enclaves present; tear down first")
        doc = {"labels": []}
        for meta in self.installed.values():
            doc["labels"].append({
                "config": meta.config.to_dict(),
                "binary": meta.binary.hex(),
                "package_sig": meta.package_sig.hex(),
                "cert": meta.cert.encode().hex(),
                "max_version_setup": meta.max_version_setup,
                "rollback_counter": meta.rollback_counter,
                "sealed_state": (meta.sealed_state.encode().hex()
                                 if meta.sealed_state else None),
            })
        counter = self.nvm.read() + 1
        blob = seal(self.aead, self.sealing_key(b"sm-state"),
                    json.dumps(doc, sort_keys=True).encode(), counter, b"sm-state")
        self.nvm.store(counter)
        self.meter.emit(EID_SM, "seal", "ok", f"counter={counter}")
        return blob.encode()

    def restore_sm_state(self, blob_bytes):
        """Inverse of seal_sm_state on a freshly booted monitor with the same
        device identity. A blob older than the NVM counter is rejected."""
        blob = SealedBlob.decode(blob_bytes)
        plain = unseal(self.aead, self.sealing_key(b"sm-state"),
                       blob, self.nvm.read(), b"sm-state")
        doc = json.loads(plain.decode())
        self.installed.clear()
        for entry in doc["labels"]:
            config = EnclaveConfig.from_dict(entry["config"])
            meta = EnclaveMeta(
                config.label, config, bytes.fromhex(entry["binary"]),
                bytes.fromhex(entry["package_sig"]),
                Certificate.decode(bytes.fromhex(entry["cert"])),
                entry["max_version_setup"], entry["rollback_counter"],
                (SealedBlob.decode(bytes.fromhex(entry["sealed_state"]))
                 if entry["sealed_state"] else None))
            self.installed[meta.label] = meta
        self.meter.emit(EID_SM, "restore", "ok",
                        f"labels={len(self.installed)}")


def _label_text(label):
    return label.rstrip(b"\x00").decode("utf-8", "replace")
