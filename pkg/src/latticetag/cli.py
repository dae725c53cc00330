"""Command line entry point: keygen, register, run, attack, cost."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import cost, harness, metering
from .credentials import (
    HEADLINE,
    Params,
    Role,
    ServerRegistry,
    generate_credential,
    load_credential,
    load_registry,
    register,
    save_credential,
    save_registry,
)
from .errors import FormatError, InvalidCredential, LatticeTagError, ParameterError
from .session import READER_SERVER, TAG_READER, run_session
from .zq import Rng, norm_p

EXIT_OK = 0
EXIT_AUTH = 1
EXIT_NOT_BLOCKED = 2
EXIT_USAGE = 64
EXIT_DATA = 65

SEED_ENV = "LATTICETAG_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _seed_bytes(text: str | None) -> bytes:
    if text is None:
        text = os.environ.get(SEED_ENV)
    if text is None:
        return os.urandom(32)
    try:
        seed = bytes.fromhex(text.strip())
    except ValueError:
        raise UsageError("seed must be hex") from None
    if len(seed) != 32:
        raise UsageError("seed must be 32 bytes (64 hex digits)")
    return seed


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None


def _params(args) -> Params:
    m = args.m[0] if isinstance(args.m, list) else args.m
    return Params(n=args.n, m=m, q=args.q, l=args.l)


def _fingerprint(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


# commands -----------------------------------------------------------------


def cmd_keygen(args, seed: bytes) -> int:
    params = _params(args)
    role = Role[args.role.upper()]
    cred = generate_credential(params, role, Rng(seed).child(f"keygen/{args.role}"))
    save_credential(cred, args.out)
    print(f"wrote {args.role} credential to {args.out}")
    print(f"params n={params.n} m={params.m} q={params.q} l={params.l}")
    print(f"y fingerprint {_fingerprint(cred.y.elems.astype('>u2').tobytes())}")
    print(f"|x|_1 = {int(cred.x.elems.sum())}  |x|_2 = {norm_p(cred.x, 2):.3f}  sigma = {params.sigma:.3f}")
    return EXIT_OK


def cmd_register(args, seed: bytes) -> int:
    paths = list(args.credentials)
    paths += [p for p in (args.tag, args.reader) if p]
    if not paths:
        raise UsageError("register needs at least one credential file")
    creds = [load_credential(p) for p in paths]
    reg_path = Path(args.registry)
    if reg_path.exists():
        registry = load_registry(reg_path)
    else:
        registry = ServerRegistry(creds[0].params)
    for path, cred in zip(paths, creds):
        try:
            handle = register(registry, cred)
        except InvalidCredential as exc:
            raise FormatError(f"{path}: {exc}") from exc
        print(f"registered {cred.role.name.lower()} {path} as handle {handle}")
    save_registry(registry, reg_path)
    print(f"registry {reg_path}: {len(registry.tags)} tags, {len(registry.readers)} readers")
    return EXIT_OK


def cmd_run(args, seed: bytes) -> int:
    if not (args.registry and args.tag and args.reader):
        raise UsageError("run needs --registry, --tag and --reader")
    cred_t = load_credential(args.tag)
    cred_r = load_credential(args.reader)
    registry = load_registry(args.registry, cred_r.params)
    params = registry.params
    counter = metering.OpCounter()
    with metering.metered(counter):
        run = run_session(registry, cred_t, cred_r, Rng(seed))
    for event in run.events:
        print(event)
    for entry in run.transcript:
        print(f"  {entry.direction:15s} {entry.msg_type.name:17s} {entry.payload_bits:7d} bits  {entry.size_bytes:6d} bytes")
    print(f"messages: {len(run.transcript)}")
    wire_formula = cost.communication_cost(params, cost.Convention.CEIL_LOG)
    real_formula = cost.communication_cost(params, cost.Convention.REAL_LOG)
    for chan, key in ((TAG_READER, "reader-tag"), (READER_SERVER, "reader-server")):
        print(
            f"{chan}: measured {run.transcript.payload_bits(chan)} bits"
            f" (ceil-log formula {wire_formula[key]:.0f}, real-log formula {real_formula[key]:.1f})"
        )
    print(f"frame bytes total: {run.transcript.frame_bytes()}")
    scans = ", ".join(f"{k}={v}" for k, v in sorted(counter.records_tried.items()))
    print(f"registry scan: {scans or 'none'}")
    print(f"outcome: {run.outcome}")
    if args.out:
        report = {
            "seed": seed.hex(),
            "success": run.outcome.success,
            "reason": None if run.outcome.success else run.outcome.reason.value,
            "messages": [
                {"direction": e.direction, "type": e.msg_type.name, "payload_bits": e.payload_bits, "frame": e.frame.hex()}
                for e in run.transcript
            ],
            "records_tried": dict(counter.records_tried),
        }
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if run.outcome.success else EXIT_AUTH


def _attack_setup(args, seed: bytes):
    if args.registry or args.tag or args.reader:
        if not (args.registry and args.tag and args.reader):
            raise UsageError("give all of --registry, --tag, --reader or none")
        cred_t = load_credential(args.tag)
        cred_r = load_credential(args.reader)
        return load_registry(args.registry, cred_t.params), cred_t, cred_r
    params = _params(args)
    setup = Rng(seed).child("setup")
    cred_t = generate_credential(params, Role.TAG, setup.child("tag"))
    cred_r = generate_credential(params, Role.READER, setup.child("reader"))
    registry = ServerRegistry(params)
    register(registry, cred_t)
    register(registry, cred_r)
    return registry, cred_t, cred_r


def cmd_attack(args, seed: bytes) -> int:
    try:
        scenarios = harness.find_scenarios(args.scenario)
    except KeyError:
        raise UsageError(f"unknown scenario {args.scenario!r}; try 'latticetag attack --list'") from None
    registry, cred_t, cred_r = _attack_setup(args, seed)
    verdicts = harness.run_scenarios(scenarios, registry, (cred_t, cred_r), Rng(seed).child("attack"))
    report = harness.format_report(verdicts)
    sys.stdout.write(report)
    blocked = sum(v.attack_blocked for v in verdicts)
    print(f"{blocked}/{len(verdicts)} scenarios blocked")
    if args.out:
        Path(args.out).write_text(report)
    return EXIT_OK if blocked == len(verdicts) else EXIT_NOT_BLOCKED


def cmd_cost(args, seed: bytes) -> int:
    conventions = args.convention or [cost.Convention.REAL_LOG.value]
    rows = cost.sweep(args.m, n=args.n, q=args.q, l=args.l, conventions=[cost.Convention(c) for c in conventions])
    text = cost.rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        sys.stdout.write(text)
    for row in rows:
        if row["note"]:
            print(row["note"], file=sys.stderr)
    return EXIT_OK


# parser -------------------------------------------------------------------


def _add_params(p, sweep: bool = False) -> None:
    if sweep:
        p.add_argument("--m", type=_int_list, default=[256, 512, 1024, 2048, 4096], help="comma-separated m values")
    else:
        p.add_argument("--m", type=int, default=HEADLINE.m)
    p.add_argument("--n", type=int, default=HEADLINE.n)
    p.add_argument("--q", type=int, default=HEADLINE.q)
    p.add_argument("--l", type=int, default=HEADLINE.l)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticetag", description=__doc__)
    parser.add_argument("--seed", help=f"32-byte hex seed (falls back to ${SEED_ENV}, then system entropy)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a tag or reader credential")
    p.add_argument("role", choices=["tag", "reader"])
    p.add_argument("--out", required=True)
    _add_params(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("register", help="add credential files to a registry file")
    p.add_argument("credentials", nargs="*")
    p.add_argument("--registry", required=True)
    p.add_argument("--tag")
    p.add_argument("--reader")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("run", help="run one honest session")
    p.add_argument("--registry")
    p.add_argument("--tag")
    p.add_argument("--reader")
    p.add_argument("--out", help="write a JSON transcript report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="run adversary scenarios")
    p.add_argument("scenario", nargs="?", help=f"scenario name, 'all' or '{harness.MITM_GROUP}'")
    p.add_argument("--list", action="store_true", help="list scenario names")
    p.add_argument("--registry")
    p.add_argument("--tag")
    p.add_argument("--reader")
    p.add_argument("--out", help="write the tab-separated report")
    _add_params(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("cost", help="cost model CSV over a sweep of m")
    _add_params(p, sweep=True)
    p.add_argument("--convention", action="append", choices=[c.value for c in cost.Convention])
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_cost)

    for sp in sub.choices.values():
        sp.add_argument("--seed", dest="sub_seed", help=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "attack":
        if args.list:
            for s in harness.builtin_scenarios():
                print(f"{s.name}\t{s.description}")
            return EXIT_OK
        if not args.scenario:
            parser.error("attack needs a scenario name (or --list)")
    try:
        seed = _seed_bytes(args.sub_seed or args.seed)
    except UsageError as exc:
        parser.error(str(exc))
    print(f"seed: {seed.hex()}", file=sys.stderr)
    try:
        return args.func(args, seed)
    except UsageError as exc:
        parser.error(str(exc))
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, InvalidCredential, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LatticeTagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
