"""enclavesim: deterministic behavioral simulator of an identity-tagged
TEE architecture.

The model enforces isolation at the memory arbiter (every bus transaction
carries a hardware-managed enclave identity), partitions the shared L2 by
ways, and drives both through a software security monitor that owns the
enclave lifecycle, sealing, and remote attestation. A scenario harness
replays JSON-described workloads and attack playbooks deterministically.
"""

from .attacks import (ATTACKS, AttackResult, attack_dma, attack_os_probe,
                      attack_prime_probe, attack_pt_escape, attack_rollback)
from .bus import (AccessDecision, BusTransaction, MemRegion,
                  MemoryArbiterConfig, SharedWindow, SystemBus,
                  ViolationRecord, perm_bits)
from .cache import (MODE_BASIC, MODE_STRICT, CacheGeometry, ExceedsPerEnclaveMax,
                    PartitionedCache, WaysUnavailable)
from .costs import CostModel
from .crypto import backend
from .errors import (DeviceUnbound, EnclaveSimError, NotSM, TranslationFault,
                     UnmappedAddress)
from .ids import (EID_BITS, EID_FIRMWARE, EID_OS, EID_SM, POOL_IDS,
                  eid_name, is_pool_eid)
from .machine import TRAP_CLASSES, Core, Machine
from .memory import SparseMemory
from .monitor import (BadPageTables, DuplicateLabel, NoFreeEid, NotLive,
                      NotOwner, NvmCounter, ResourceUnavailable,
                      SecurityMonitor, UnknownLabel, VersionRollback)
from .packaging import (AttestationReport, BadCertChain, BadMagic,
                        BadSignature, Certificate, Ecosystem, EnclaveConfig,
                        PackageError, RollbackDetected, SealedBlob,
                        Truncated, build_package, make_certificate,
                        pad_label, peek_package, provider_verify_report,
                        quick_package, seal, synthesize_binary, unseal,
                        verify_certificate, verify_package)
from .scenario import (EVENT_KINDS, Event, PeripheralSpec, RunResult,
                       Scenario, ScenarioError, Simulation, load_scenario,
                       make_package_for, parse_scenario, run)
from .stats import (checkpoint_delta, relative_overhead, render_plot_data,
                    report_stats, way_sweep, working_set_scenario)
from .trace import Meter, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "ATTACKS", "AccessDecision", "AttackResult", "AttestationReport",
    "BadCertChain", "BadMagic", "BadPageTables", "BadSignature",
    "BusTransaction", "CacheGeometry", "Certificate", "Core", "CostModel",
    "DeviceUnbound", "DuplicateLabel", "EID_BITS", "EID_FIRMWARE", "EID_OS",
    "EID_SM", "EVENT_KINDS", "Ecosystem", "EnclaveConfig",
    "EnclaveSimError", "Event", "ExceedsPerEnclaveMax", "MODE_BASIC",
    "MODE_STRICT", "Machine", "MemRegion",
    "MemoryArbiterConfig", "Meter", "NoFreeEid", "NotLive", "NotOwner",
    "NotSM", "NvmCounter", "POOL_IDS", "PackageError", "PartitionedCache",
    "PeripheralSpec", "ResourceUnavailable", "RollbackDetected", "RunResult",
    "Scenario", "ScenarioError", "SealedBlob", "SecurityMonitor",
    "SharedWindow", "Simulation", "SparseMemory", "SystemBus",
    "TRAP_CLASSES", "TraceRecord", "TranslationFault", "Truncated",
    "UnknownLabel", "UnmappedAddress", "VersionRollback", "ViolationRecord",
    "WaysUnavailable",
    "attack_dma", "attack_os_probe", "attack_prime_probe",
    "attack_pt_escape", "attack_rollback", "backend", "build_package",
    "checkpoint_delta", "eid_name", "is_pool_eid", "load_scenario",
    "make_certificate", "make_package_for", "pad_label", "parse_scenario",
    "peek_package", "perm_bits", "provider_verify_report", "quick_package",
    "relative_overhead", "render_plot_data", "report_stats", "run", "seal",
    "synthesize_binary", "unseal", "verify_certificate", "verify_package",
    "way_sweep", "working_set_scenario",
]
