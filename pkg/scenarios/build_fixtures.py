#!/usr/bin/env python3
"""Regenerate the .cep packages the scenario suite references.

Everything is derived from the default trust seed, so running this script
twice produces byte-identical files. Run from anywhere:

    python3 scenarios/build_fixtures.py
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from enclavesim.scenario import DEFAULT_TRUST_SEED, make_package_for

HERE = pathlib.Path(__file__).resolve().parent
PKGS = HERE / "pkgs"

RECIPES = {
    "vault.cep": dict(label_text="vault"),
    "worker.cep": dict(label_text="worker", memory_bytes=256 * 1024,
                       cache_mode="strict", cache_ways=4),
    "noisy.cep": dict(label_text="noisy", cache_mode="basic"),
    "krn.cep": dict(label_text="krn", enclave_type="kernel", cores=1),
    "nicvault.cep": dict(label_text="nicvault",
                         peripherals=(("nic0", True),)),
    "alpha.cep": dict(label_text="alpha", enclave_type="sub",
                      memory_bytes=16 * 1024, binary_bytes=2048),
    "beta.cep": dict(label_text="beta", enclave_type="sub",
                     memory_bytes=16 * 1024, binary_bytes=2048),
    "gamma.cep": dict(label_text="gamma", enclave_type="sub",
                      memory_bytes=16 * 1024, binary_bytes=2048),
}


def main():
    PKGS.mkdir(exist_ok=True)
    for name, recipe in RECIPES.items():
        blob = make_package_for(DEFAULT_TRUST_SEED, **recipe)
        path = PKGS / name
        if path.exists() and path.read_bytes() == blob:
            print(f"unchanged {path}")
            continue
        path.write_bytes(blob)
        print(f"wrote {path} ({len(blob)} bytes)")


if __name__ == "__main__":
    main()
