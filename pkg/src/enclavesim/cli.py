"""Command line interface.

Stable contract: subcommands `run`, `package build`, `package verify`,
`attest verify`, `attack <name>`, `sweep`; the tab-separated trace format;
and the exit codes. Attack and verify subcommands use 0 = contained/valid,
2 = leaked/invalid, 1 = operational error. Cost-model constants can be
overridden with ENCLAVESIM_COST_<NAME> environment variables.
"""

import argparse
import json
import random
import sys

from .attacks import ATTACKS
from .costs import CostModel
from .crypto import backend
from .errors import EnclaveSimError
from .packaging import (AttestationReport, EnclaveConfig, Ecosystem,
                        PackageError, build_package, pad_label, peek_package,
                        provider_verify_report, synthesize_binary,
                        verify_package)
from .scenario import DEFAULT_TRUST_SEED, Simulation, load_scenario
from .stats import report_stats, render_plot_data, way_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LEAKED = 2      # also: invalid package / rejected report


def _cost_model():
    return CostModel().with_env_overrides()


def _ecosystem(args):
    schemes = backend(args.backend)
    return schemes, Ecosystem.create(schemes[0], random.Random(args.trust_seed))


def _add_trust_args(parser):
    parser.add_argument("--backend", choices=("real", "double"),
                        default="double", help="crypto backend")
    parser.add_argument("--trust-seed", type=lambda s: int(s, 0),
                        default=DEFAULT_TRUST_SEED,
                        help="seed anchoring the certificate chains")


# -- run ----------------------------------------------------------------------

def _cmd_run(args):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    result = Simulation(scenario, _cost_model()).run_events()
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write(result.trace)
    if args.stats_out:
        with open(args.stats_out, "w", encoding="utf-8") as fh:
            json.dump(report_stats(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"{result.scenario_name}: {result.cycles} cycles, "
          f"{len(result.violations)} violations, "
          f"{len(result.errors)} event errors")
    print(f"trace digest {result.digest}")
    return EXIT_OK


# -- package ---------------------------------------------------------------------

def _parse_peripheral(text):
    name, _, flag = text.partition(":")
    if flag not in ("", "shared", "exclusive"):
        raise argparse.ArgumentTypeError(
            f"{text!r}: expected name, name:shared or name:exclusive")
    return name, flag != "shared"


def _cmd_package_build(args):
    schemes, eco = _ecosystem(args)
    if args.binary:
        with open(args.binary, "rb") as fh:
            binary = fh.read()
    else:
        binary = synthesize_binary(args.label, args.binary_bytes,
                                   args.binary_seed)
    config = EnclaveConfig(pad_label(args.label), args.version, args.type,
                           args.memory_bytes, args.cache_mode,
                           args.cache_ways, args.cores,
                           tuple(args.peripheral))
    pkg = build_package(config, binary, eco.provider_private,
                        eco.provider_cert, schemes[0])
    with open(args.out, "wb") as fh:
        fh.write(pkg)
    _, _, _, sig = peek_package(pkg)
    print(f"wrote {args.out}: label={args.label} version={args.version} "
          f"type={args.type} binary={len(binary)}B")
    print(f"signature {sig.hex()}")
    return EXIT_OK


def _cmd_package_verify(args):
    schemes, eco = _ecosystem(args)
    with open(args.package, "rb") as fh:
        pkg = fh.read()
    revoked = frozenset(bytes.fromhex(k) for k in args.revoke)
    try:
        config, binary, cert, sig = verify_package(
            pkg, eco.provider_root_public, schemes[0], revoked)
    except PackageError as exc:
        print(f"invalid: {type(exc).__name__}: {exc}")
        return EXIT_LEAKED
    label = config.label.rstrip(b"\x00").decode("utf-8", "replace")
    print(f"valid: label={label} version={config.version} "
          f"type={config.enclave_type} memory={config.memory_bytes} "
          f"cache={config.cache_mode}/{config.cache_ways} "
          f"binary={len(binary)}B")
    print(f"signature {sig.hex()}")
    return EXIT_OK


# -- attestation --------------------------------------------------------------------

def _cmd_attest_verify(args):
    schemes, eco = _ecosystem(args)
    with open(args.report, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if args.label is not None:
        # stats documents hold one report per attested label
        reports = doc.get("attestations", doc)
        if args.label not in reports:
            print(f"error: no attestation report for {args.label!r}",
                  file=sys.stderr)
            return EXIT_ERROR
        doc = reports[args.label]
    report = AttestationReport.from_json_dict(doc)

    if args.expected_package:
        with open(args.expected_package, "rb") as fh:
            _, _, _, expected_sig = peek_package(fh.read())
    elif args.expected_sig:
        expected_sig = bytes.fromhex(args.expected_sig)
    else:
        print("error: need --expected-package or --expected-sig",
              file=sys.stderr)
        return EXIT_ERROR
    nonce = bytes.fromhex(args.nonce) if args.nonce else report.nonce
    revoked = frozenset(bytes.fromhex(k) for k in args.revoke)

    ok = provider_verify_report(schemes[0], report, eco.device_root_public,
                                expected_sig, nonce, revoked)
    print("accepted" if ok else "rejected")
    return EXIT_OK if ok else EXIT_LEAKED


# -- attacks -----------------------------------------------------------------------

def _cmd_attack(args):
    kwargs = {}
    if args.scenario:
        scenario = load_scenario(args.scenario)
        kwargs["seed"] = scenario.seed
        labels = sorted(scenario.labels())
        if labels:
            kwargs[_label_param(args.name)] = labels[0]
    if args.negative_control:
        kwargs["negative_control"] = True
    if args.name == "prime_probe":
        # its negative control is simply a victim without way partitioning
        kwargs["trials"] = args.trials
        kwargs["victim_strict"] = not (args.unprotected
                                       or args.negative_control)
        kwargs["victim_idle"] = args.victim_idle
        kwargs.pop("negative_control", None)
    else:
        kwargs.pop("seed", None)

    result = ATTACKS[args.name](**kwargs)
    doc = {"attack": result.name, "verdict": result.verdict,
           "details": result.details}
    if result.accuracy is not None:
        doc["accuracy"] = result.accuracy
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK if result.contained else EXIT_LEAKED


def _label_param(name):
    return {"os_probe": "target_label", "dma": "target_label",
            "prime_probe": "victim_label", "pt_escape": "label",
            "rollback": "label"}[name]


# -- way sweep ----------------------------------------------------------------------

def _cmd_sweep(args):
    ways = [int(w) for w in args.ways.split(",")]
    rows = way_sweep(ways, rounds=args.rounds)
    text = render_plot_data(rows)
    if args.plot_out:
        with open(args.plot_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


# -- wiring -------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="enclavesim",
        description="deterministic behavioral simulator of an "
                    "identity-tagged TEE architecture")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                   help="override the scenario's seed")
    p.add_argument("--trace-out", help="write the trace here")
    p.add_argument("--stats-out", help="write the stats JSON here")
    p.set_defaults(fn=_cmd_run)

    pkg = sub.add_parser("package", help="build or verify enclave packages")
    pkg_sub = pkg.add_subparsers(dest="package_command", required=True)

    p = pkg_sub.add_parser("build")
    p.add_argument("--label", required=True)
    p.add_argument("--version", type=int, default=1)
    p.add_argument("--type", choices=("user", "kernel", "sub"), default="user")
    p.add_argument("--memory-bytes", type=lambda s: int(s, 0),
                   default=64 * 1024)
    p.add_argument("--cache-mode", choices=("none", "basic", "strict"),
                   default="basic")
    p.add_argument("--cache-ways", type=int, default=0)
    p.add_argument("--cores", type=int, default=0)
    p.add_argument("--peripheral", action="append", default=[],
                   type=_parse_peripheral, metavar="NAME[:shared|:exclusive]")
    p.add_argument("--binary", help="image file; synthesized when omitted")
    p.add_argument("--binary-bytes", type=lambda s: int(s, 0), default=8192)
    p.add_argument("--binary-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_trust_args(p)
    p.set_defaults(fn=_cmd_package_build)

    p = pkg_sub.add_parser("verify")
    p.add_argument("--package", required=True)
    p.add_argument("--revoke", action="append", default=[],
                   metavar="PUBKEY_HEX")
    _add_trust_args(p)
    p.set_defaults(fn=_cmd_package_verify)

    att = sub.add_parser("attest", help="provider-side attestation checks")
    att_sub = att.add_subparsers(dest="attest_command", required=True)
    p = att_sub.add_parser("verify")
    p.add_argument("--report", required=True,
                   help="report JSON (or a run's stats JSON with --label)")
    p.add_argument("--label", help="pick this label out of a stats document")
    p.add_argument("--expected-package", help="package the report must match")
    p.add_argument("--expected-sig", help="expected signature, hex")
    p.add_argument("--nonce", help="expected nonce, hex; defaults to the "
                                   "report's own (freshness unchecked)")
    p.add_argument("--revoke", action="append", default=[],
                   metavar="PUBKEY_HEX")
    _add_trust_args(p)
    p.set_defaults(fn=_cmd_attest_verify)

    p = sub.add_parser("attack", help="run an attack scenario")
    p.add_argument("name", choices=sorted(ATTACKS))
    p.add_argument("--scenario", help="take seed and victim label from here")
    p.add_argument("--negative-control", action="store_true",
                   help="disable the defense; the attack must then leak")
    p.add_argument("--trials", type=int, default=1000,
                   help="prime_probe only")
    p.add_argument("--unprotected", action="store_true",
                   help="prime_probe only: victim without way partitioning")
    p.add_argument("--victim-idle", action="store_true",
                   help="prime_probe only: no-signal baseline")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("sweep", help="partitioning overhead vs. way budget")
    p.add_argument("--ways", default="1,2,4,8,16")
    p.add_argument("--rounds", type=int, default=40)
    p.add_argument("--plot-out", help="write the plottable table here")
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (EnclaveSimError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
