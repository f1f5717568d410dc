"""Remote attestation: a provider decides whether to trust a live enclave.

The monitor signs (measurement, config digest, nonce) with a device key
whose certificate chains to the manufacturer root. The provider checks the
chain, the freshness nonce and that the measurement matches the package it
published. A single flipped byte in the loaded image never gets that far:
setup already refuses it.
"""

import hashlib

from enclavesim.packaging import (BadSignature, provider_verify_report,
                                  quick_package)

import demo_stack

stack = demo_stack.build()
pkg, config, binary = quick_package(stack.schemes[0], stack.ecosystem,
                                    "trading-core", memory_bytes=64 * 1024)
stack.monitor.install(pkg)
meta = stack.monitor.installed[config.label]

eid = stack.monitor.setup(config.label, binary, config)
nonce = hashlib.sha256(b"provider session 1").digest()
report = stack.monitor.attest(eid, nonce)

genuine = provider_verify_report(stack.schemes[0], report,
                                 stack.ecosystem.device_root_public,
                                 meta.package_sig, nonce)
print(f"genuine enclave, fresh nonce:   accepted={genuine}")

replayed = provider_verify_report(stack.schemes[0], report,
                                  stack.ecosystem.device_root_public,
                                  meta.package_sig, bytes(32))
print(f"same report, wrong nonce:       accepted={replayed}")

stack.monitor.teardown(eid)
tampered = bytearray(binary)
tampered[17] ^= 0x40
try:
    stack.monitor.setup(config.label, bytes(tampered), config)
except BadSignature as exc:
    print(f"tampered image at setup:        refused ({exc})")
