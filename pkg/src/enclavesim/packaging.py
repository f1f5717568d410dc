"""Enclave package wire format, certificates, sealed blobs, attestation.

Shared by the security monitor (install/setup verification, state sealing)
and the out-of-band roles: the provider who signs packages and verifies
attestation reports, and the store operator whose root key anchors the
provider certificate.

All parsers are total: arbitrary input bytes produce a typed PackageError,
never an unhandled exception.
"""

import dataclasses
import hashlib
import struct

from .crypto import (SIGNATURE_BYTES, PUBLIC_KEY_BYTES, NONCE_BYTES, TAG_BYTES,
                     TamperDetected)
from .errors import EnclaveSimError

PACKAGE_MAGIC = bytes((0x43, 0x55, 0x52, 0x45))
PACKAGE_FORMAT_VERSION = 1
PACKAGE_EXT = ".cep"

LABEL_BYTES = 32
STATE_BYTES = 64

ENCLAVE_TYPES = ("user", "kernel", "sub")
CACHE_MODES = ("none", "basic", "strict")


class PackageError(EnclaveSimError):
    pass


class BadMagic(PackageError):
    pass


class Truncated(PackageError):
    """Input too short, trailing bytes, or a malformed fixed-layout field."""


class BadCertChain(PackageError):
    pass


class BadSignature(PackageError):
    pass


class RollbackDetected(EnclaveSimError):
    """Sealed blob carries an older counter than the expected one."""


def pad_label(text):
    """Scenario-facing labels are short UTF-8 strings padded with NULs."""
    raw = text.encode("utf-8")
    if len(raw) > LABEL_BYTES:
        raise ValueError(f"label {text!r} exceeds {LABEL_BYTES} bytes")
    return raw.ljust(LABEL_BYTES, b"\x00")


# ---------------------------------------------------------------------------
# enclave configuration, canonical binary form

@dataclasses.dataclass(frozen=True)
class EnclaveConfig:
    label: bytes
    version: int
    enclave_type: str
    memory_bytes: int
    cache_mode: str = "basic"
    cache_ways: int = 0
    cores: int = 0
    peripherals: tuple = ()     # of (name, exclusive: bool)

    def __post_init__(self):
        if len(self.label) != LABEL_BYTES:
            raise ValueError(f"label must be exactly {LABEL_BYTES} bytes")
        if not 0 <= self.version < 2 ** 32:
            raise ValueError("version out of u32 range")
        if self.enclave_type not in ENCLAVE_TYPES:
            raise ValueError(f"bad enclave type {self.enclave_type!r}")
        if not 0 <= self.memory_bytes < 2 ** 64:
            raise ValueError("memory_bytes out of range")
        if self.cache_mode not in CACHE_MODES:
            raise ValueError(f"bad cache mode {self.cache_mode!r}")
        if self.cache_mode == "strict" and self.cache_ways < 1:
            raise ValueError("strict cache mode requires at least one way")
        if self.enclave_type == "kernel" and self.cores < 1:
            raise ValueError("kernel-space enclaves need at least one core")
        if not 0 <= self.cache_ways < 2 ** 16 or not 0 <= self.cores < 2 ** 16:
            raise ValueError("cache_ways/cores out of u16 range")
        object.__setattr__(self, "peripherals",
                           tuple((str(n), bool(x)) for n, x in self.peripherals))

    def to_dict(self):
        return {
            "label": self.label.hex(),
            "version": self.version,
            "enclave_type": self.enclave_type,
            "memory_bytes": self.memory_bytes,
            "cache_mode": self.cache_mode,
            "cache_ways": self.cache_ways,
            "cores": self.cores,
            "peripherals": [[n, x] for n, x in self.peripherals],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(bytes.fromhex(doc["label"]), doc["version"],
                   doc["enclave_type"], doc["memory_bytes"],
                   doc["cache_mode"], doc["cache_ways"], doc["cores"],
                   tuple((n, bool(x)) for n, x in doc["peripherals"]))


def serialize_config(config):
    """Fixed-order little-endian layout; byte-stable so signatures are."""
    out = bytearray()
    out += config.label
    out += struct.pack("<IBQBHHH",
                       config.version,
                       ENCLAVE_TYPES.index(config.enclave_type),
                       config.memory_bytes,
                       CACHE_MODES.index(config.cache_mode),
                       config.cache_ways,
                       config.cores,
                       len(config.peripherals))
    for name, exclusive in config.peripherals:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError("peripheral name too long")
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<B", int(exclusive))
    return bytes(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, count, what):
        if self.pos + count > len(self.data):
            raise Truncated(f"short read in {what}")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))[0]

    def done(self, what):
        if self.pos != len(self.data):
            raise Truncated(f"trailing bytes after {what}")


def parse_config(data):
    r = _Reader(data)
    label = bytes(r.take(LABEL_BYTES, "label"))
    version = r.u("<I", "version")
    type_index = r.u("<B", "enclave type")
    memory_bytes = r.u("<Q", "memory size")
    mode_index = r.u("<B", "cache mode")
    cache_ways = r.u("<H", "cache ways")
    cores = r.u("<H", "cores")
    count = r.u("<H", "peripheral count")
    if type_index >= len(ENCLAVE_TYPES) or mode_index >= len(CACHE_MODES):
        raise Truncated("enum field out of range")
    peripherals = []
    for _ in range(count):
        name_len = r.u("<H", "peripheral name length")
        try:
            name = bytes(r.take(name_len, "peripheral name")).decode("utf-8")
        except UnicodeDecodeError:
            raise Truncated("peripheral name is not UTF-8") from None
        exclusive = r.u("<B", "peripheral flag")
        peripherals.append((name, bool(exclusive)))
    r.done("config")
    try:
        return EnclaveConfig(label, version, ENCLAVE_TYPES[type_index],
                             memory_bytes, CACHE_MODES[mode_index],
                             cache_ways, cores, tuple(peripherals))
    except ValueError as exc:
        raise Truncated(f"inconsistent config: {exc}") from None


# ---------------------------------------------------------------------------
# certificates

CERT_BYTES = PUBLIC_KEY_BYTES + SIGNATURE_BYTES


@dataclasses.dataclass(frozen=True)
class Certificate:
    subject_key: bytes
    issuer_sig: bytes

    def encode(self):
        return self.subject_key + self.issuer_sig

    @classmethod
    def decode(cls, data):
        if len(data) != CERT_BYTES:
            raise Truncated("certificate must be subject key + issuer signature")
        return cls(bytes(data[:PUBLIC_KEY_BYTES]), bytes(data[PUBLIC_KEY_BYTES:]))


def make_certificate(scheme, issuer_private, subject_key):
    return Certificate(subject_key, scheme.sign(issuer_private, subject_key))


def verify_certificate(scheme, cert, root_key, revoked=frozenset()):
    if cert.subject_key in revoked:
        return False
    return scheme.verify(root_key, cert.subject_key, cert.issuer_sig)


# ---------------------------------------------------------------------------
# the package container

def _sign_input(config_bytes, binary):
    return (PACKAGE_MAGIC
            + struct.pack("<I", PACKAGE_FORMAT_VERSION)
            + config_bytes + binary)


def build_package(config, binary, provider_private, provider_cert, scheme):
    """Reproducible: identical inputs give identical bytes."""
    config_bytes = serialize_config(config)
    sig = scheme.sign(provider_private, _sign_input(config_bytes, binary))
    cert_bytes = provider_cert.encode()
    return b"".join((
        PACKAGE_MAGIC,
        struct.pack("<I", PACKAGE_FORMAT_VERSION),
        struct.pack("<I", len(config_bytes)), config_bytes,
        struct.pack("<I", len(binary)), bytes(binary),
        sig,
        struct.pack("<I", len(cert_bytes)), cert_bytes,
    ))


def _split_container(pkg_bytes):
    r = _Reader(pkg_bytes)
    magic = bytes(r.take(4, "magic"))
    if magic != PACKAGE_MAGIC:
        raise BadMagic(f"bad magic {magic.hex()}")
    fmt = r.u("<I", "format version")
    if fmt != PACKAGE_FORMAT_VERSION:
        raise Truncated(f"unsupported format version {fmt}")
    config_bytes = bytes(r.take(r.u("<I", "config length"), "config"))
    binary = bytes(r.take(r.u("<I", "binary length"), "binary"))
    sig = bytes(r.take(SIGNATURE_BYTES, "signature"))
    cert = Certificate.decode(r.take(r.u("<I", "certificate length"), "certificate"))
    r.done("package")
    return config_bytes, binary, sig, cert


def verify_package(pkg_bytes, provider_root, scheme, revoked=frozenset()):
    """Full validation: layout, certificate chain, then signature.
    Returns (config, binary, certificate, signature); the signature doubles
    as the enclave measurement quoted in attestation reports."""
    config_bytes, binary, sig, cert = _split_container(pkg_bytes)
    config = parse_config(config_bytes)
    if not verify_certificate(scheme, cert, provider_root, revoked):
        raise BadCertChain("provider certificate does not chain to the store root")
    if not scheme.verify(cert.subject_key, _sign_input(config_bytes, binary), sig):
        raise BadSignature("package signature rejected")
    return config, binary, cert, sig


def peek_package(pkg_bytes):
    """Structural parse only: no chain or signature checks. Used where the
    label/config must be known before the monitor performs real verification
    (scenario loading, CLI display). Returns (config, binary, cert, sig)."""
    config_bytes, binary, sig, cert = _split_container(pkg_bytes)
    return parse_config(config_bytes), binary, cert, sig


def synthesize_binary(label_text, size, seed=0):
    """Deterministic stand-in enclave image (there is no ISA to run)."""
    out = bytearray()
    block = 0
    while len(out) < size:
        out += hashlib.sha256(
            f"{label_text}|{seed}|{block}".encode()).digest()
        block += 1
    return bytes(out[:size])


def quick_package(scheme, ecosystem, label_text, version=1,
                  enclave_type="user", memory_bytes=64 * 1024,
                  cache_mode="basic", cache_ways=0, cores=0,
                  peripherals=(), binary=None, binary_seed=0,
                  binary_bytes=8192):
    """One-call signed package for tests, demos and fixture generation.
    Returns (package_bytes, config, binary)."""
    config = EnclaveConfig(pad_label(label_text), version, enclave_type,
                           memory_bytes, cache_mode, cache_ways, cores,
                           tuple(peripherals))
    if binary is None:
        binary = synthesize_binary(label_text, binary_bytes, binary_seed)
    pkg = build_package(config, binary, ecosystem.provider_private,
                        ecosystem.provider_cert, scheme)
    return pkg, config, binary


# ---------------------------------------------------------------------------
# sealed blobs (state at rest)

@dataclasses.dataclass(frozen=True)
class SealedBlob:
    counter: int
    nonce: bytes
    ciphertext: bytes
    tag: bytes

    def encode(self):
        return (struct.pack("<Q", self.counter) + self.nonce
                + struct.pack("<I", len(self.ciphertext)) + self.ciphertext
                + self.tag)

    @classmethod
    def decode(cls, data):
        r = _Reader(data)
        counter = r.u("<Q", "counter")
        nonce = bytes(r.take(NONCE_BYTES, "nonce"))
        ciphertext = bytes(r.take(r.u("<I", "ciphertext length"), "ciphertext"))
        tag = bytes(r.take(TAG_BYTES, "tag"))
        r.done("sealed blob")
        return cls(counter, nonce, ciphertext, tag)


def _seal_nonce(context_label, counter):
    # counter-derived, unique per (key, counter) since keys are per-context
    material = b"seal-nonce" + context_label + struct.pack("<Q", counter)
    return hashlib.sha256(material).digest()[:NONCE_BYTES]


def _seal_aad(counter, context_label):
    # the counter AND the context are authenticated, so a blob can be
    # neither re-countered nor replayed into a different context even if
    # two contexts ever shared a key
    return struct.pack("<Q", counter) + context_label


def seal(aead, key, plaintext, counter, context_label):
    nonce = _seal_nonce(context_label, counter)
    ciphertext, tag = aead.encrypt(key, nonce, plaintext,
                                   _seal_aad(counter, context_label))
    return SealedBlob(counter, nonce, ciphertext, tag)


def unseal(aead, key, blob, expected_counter, context_label):
    """Counter check first (rollback), then authenticated open (tamper)."""
    if blob.counter != expected_counter:
        raise RollbackDetected(
            f"sealed counter {blob.counter} != expected {expected_counter}")
    return aead.decrypt(key, blob.nonce, blob.ciphertext, blob.tag,
                        _seal_aad(blob.counter, context_label))


# ---------------------------------------------------------------------------
# attestation

NONCE_LEN_ATTEST = 32


@dataclasses.dataclass(frozen=True)
class AttestationReport:
    enclave_sig: bytes      # the package signature the monitor vouches for
    nonce: bytes
    device_cert: Certificate
    signature: bytes        # device-key signature over (enclave_sig || nonce)

    def to_json_dict(self):
        return {
            "enclave_sig": self.enclave_sig.hex(),
            "nonce": self.nonce.hex(),
            "device_cert": self.device_cert.encode().hex(),
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_json_dict(cls, doc):
        return cls(bytes.fromhex(doc["enclave_sig"]),
                   bytes.fromhex(doc["nonce"]),
                   Certificate.decode(bytes.fromhex(doc["device_cert"])),
                   bytes.fromhex(doc["signature"]))


def provider_verify_report(scheme, report, device_root, expected_enclave_sig,
                           expected_nonce, revoked=frozenset()):
    """Boolean outcome on purpose: the provider learns accept/reject only."""
    if not verify_certificate(scheme, report.device_cert, device_root, revoked):
        return False
    if report.enclave_sig != expected_enclave_sig:
        return False
    if report.nonce != expected_nonce:
        return False
    return scheme.verify(report.device_cert.subject_key,
                         report.enclave_sig + report.nonce,
                         report.signature)


# ---------------------------------------------------------------------------
# key ecosystem helper (provider + device vendor roles)

@dataclasses.dataclass
class Ecosystem:
    """Both certificate chains, generated deterministically from an RNG.
    Private root keys are kept so tests can mint extra certificates."""
    device_root_private: bytes
    device_root_public: bytes
    device_private: bytes
    device_public: bytes
    device_cert: Certificate
    provider_root_private: bytes
    provider_root_public: bytes
    provider_private: bytes
    provider_public: bytes
    provider_cert: Certificate

    @classmethod
    def create(cls, scheme, rng):
        droot_sk, droot_pk = scheme.generate_keypair(rng)
        dev_sk, dev_pk = scheme.generate_keypair(rng)
        proot_sk, proot_pk = scheme.generate_keypair(rng)
        prov_sk, prov_pk = scheme.generate_keypair(rng)
        return cls(droot_sk, droot_pk, dev_sk, dev_pk,
                   make_certificate(scheme, droot_sk, dev_pk),
                   proot_sk, proot_pk, prov_sk, prov_pk,
                   make_certificate(scheme, proot_sk, prov_pk))
