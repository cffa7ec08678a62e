"""Command-line entry point.

Exit codes: 0 success, 1 failed evaluation or rejected authentication,
2 usage error, 3 I/O or protocol error.
"""
from __future__ import annotations

import argparse
import datetime
import json
import socket
import sys
import threading
from pathlib import Path

from . import __version__
from .attacks import (AttackBudget, InsiderKnowledge, arbiter_crps, brute_force_attack,
                      guess_attack_trials, insider_attack, ml_attack_arbiter, wilson_interval)
from .authproto import (CrpStore, SocketTransport, authenticate, enroll, parse_address, pipe, serve)
from .errors import FamilyFileError, ParamsMismatch, ProtocolError, PufError
from .evaluator import default_params, evaluate_device, level_quantum_guess
from .extractor import ExtractorParams
from .families import ArbiterPuf, QuantumEurPuf, device_from_params, load_family, save_family
from .rng import Rng

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _extractor(device, args) -> ExtractorParams:
    r = getattr(device, "repetition", 1)
    salt = bytes.fromhex(args.salt) if getattr(args, "salt", None) else bytes(16)
    return ExtractorParams(r=r, out_len=getattr(args, "out_len", None), salt=salt)


def _write_report(doc: dict, args) -> None:
    if not args.deterministic:
        doc = dict(doc, generated_at=datetime.datetime.now(datetime.timezone.utc).isoformat())
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    params = {"family": args.family, "seed": args.seed, "N": args.N, "l": args.l, "l_S": args.l_S,
              "k": args.k, "noise_p": args.noise_p, "index_bits": args.index_bits, "r": args.r}
    params = {k: v for k, v in params.items() if v is not None}
    try:
        device = device_from_params(params)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    out = args.out or "device.json"
    save_family(device, out)
    print(f"wrote {device.family_id} device to {out}")
    return EXIT_OK


def cmd_enroll(args) -> int:
    device = load_family(args.device)
    store = enroll(device, args.n, Rng(args.seed), _extractor(device, args))
    store.save(args.store)
    print(f"enrolled {len(store)} pairs into {args.store}")
    return EXIT_OK


def cmd_attack(args) -> int:
    device = load_family(args.device)
    rng = Rng(args.seed)
    budget = AttackBudget(args.dt_a, args.dt_r)
    if args.kind == "brute":
        doc = brute_force_attack(device, budget, args.trials, rng, workers=args.workers).to_dict()
    elif args.kind == "insider":
        doc = insider_attack(device, InsiderKnowledge.from_device(device), budget, args.trials, rng).to_dict()
    elif args.kind == "guess":
        if not isinstance(device, QuantumEurPuf):
            raise UsageError("guess attack needs a quantum device")
        hits = guess_attack_trials(device.l, args.trials, rng)
        full = int(hits.all(axis=1).sum())
        doc = {"attack": "guess_challenge", "family": device.family_id, "params": device.structure(),
               "budget": {"max_reads": 1}, "reads_used": 1, "n_trials": args.trials,
               "success_rate": full / args.trials, "ci95": list(wilson_interval(full, args.trials)),
               "per_bit_rate": float(hits.mean()), "level": level_quantum_guess(device.l)}
    else:
        if not isinstance(device, ArbiterPuf):
            raise UsageError("ml attack needs an arbiter device")
        train = arbiter_crps(device, args.train, rng.fork("train"))
        test = arbiter_crps(device, args.trials, rng.fork("test"))
        res = ml_attack_arbiter(train, device.k, test, rng=rng.fork("sgd"))
        doc = {"attack": "ml_arbiter", "family": device.family_id, "params": device.structure(),
               "budget": budget.to_dict(), "reads_used": args.train, "n_trials": args.trials,
               "success_rate": res.held_out_accuracy,
               "ci95": list(wilson_interval(round(res.held_out_accuracy * args.trials), args.trials)),
               "train_accuracy": res.train_accuracy, "epochs": res.epochs}
    _write_report(doc, args)
    print(f"{doc['attack']}: success_rate={doc['success_rate']:.6g} over {doc['n_trials']} trials",
          file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    device = load_family(args.device)
    budget = AttackBudget(args.dt_a, args.dt_r)
    params = default_params(device, budget, args.target_L)
    report = evaluate_device(device, params, budget, Rng(args.seed), extractor=_extractor(device, args),
                             n_trials=args.trials)
    _write_report(report.to_dict(), args)
    print(report.render(), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_serve(args) -> int:
    store = CrpStore.load(args.store)
    rng = Rng(args.seed)
    addr = parse_address(args.address)
    if addr is None:
        raise UsageError("serve needs a host:port address; use 'authenticate --address pipe:' for in-memory")
    accepted = 0
    with socket.create_server(addr) as srv:
        print(f"verifier listening on {addr[0]}:{srv.getsockname()[1]}", flush=True)
        for _ in range(args.sessions):
            conn, peer = srv.accept()
            res = serve(store, SocketTransport(conn), rng, timeout=args.timeout)
            accepted += res.accepted
            print(f"session from {peer[0]}: {'accept' if res.accepted else 'reject'}"
                  + (f" ({res.error})" if res.error else ""), flush=True)
            store.save(args.store)
    return EXIT_OK if accepted == args.sessions else EXIT_FAIL


def cmd_authenticate(args) -> int:
    device = load_family(args.device)
    ex = _extractor(device, args)
    addr = parse_address(args.address)
    if addr is None:
        if not args.store:
            raise UsageError("pipe: transport runs the verifier in-process and needs --store")
        store = CrpStore.load(args.store)
        v_end, p_end = pipe()
        out = {}
        th = threading.Thread(target=lambda: out.setdefault(
            "v", serve(store, v_end, Rng(args.seed), timeout=args.timeout)))
        th.start()
        res = authenticate(device, p_end, ex, timeout=args.timeout)
        th.join()
        store.save(args.store)
    else:
        try:
            sock = socket.create_connection(addr, timeout=args.timeout)
        except OSError as exc:
            raise ProtocolError(f"cannot connect to {args.address}: {exc}") from exc
        res = authenticate(device, SocketTransport(sock), ex, timeout=args.timeout)
    print("accept" if res.accepted else f"reject{f' ({res.error})' if res.error else ''}")
    if res.error and not res.accepted and "cannot answer" not in res.error:
        return EXIT_IO
    return EXIT_OK if res.accepted else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pufsim", description="PUF simulation and security evaluation")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def reporting(sp):
        sp.add_argument("--out", help="JSON report path (default: standard output)")
        sp.add_argument("--deterministic", action="store_true", help="omit timestamps from reports")

    g = sub.add_parser("gen", help="write a family parameter file")
    g.add_argument("--family", required=True, choices=["toy", "table", "arbiter", "keyed_hash", "quantum", "cuf"])
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--N", type=int)
    g.add_argument("--l", type=int)
    g.add_argument("--l_S", "--l-S", dest="l_S", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--noise-p", "--noise_p", dest="noise_p", type=float)
    g.add_argument("--index-bits", "--index_bits", dest="index_bits", type=int)
    g.add_argument("--r", type=int, help="read-out repetition factor (table/arbiter)")
    g.add_argument("--out", help="output path (default device.json)")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("enroll", help="enroll challenge/secret pairs into a store file")
    e.add_argument("--device", default="device.json")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--store", default="crps.txt")
    e.add_argument("--out-len", dest="out_len", type=int, help="privacy amplification length")
    e.add_argument("--salt", help="16-byte hex salt")
    e.set_defaults(func=cmd_enroll)

    a = sub.add_parser("attack", help="run an attack and write a JSON transcript")
    a.add_argument("kind", choices=["brute", "insider", "guess", "ml"])
    a.add_argument("--device", default="device.json")
    a.add_argument("--dt-a", dest="dt_a", type=float, default=1.0)
    a.add_argument("--dt-r", dest="dt_r", type=float, default=1.0)
    a.add_argument("--trials", type=int, default=10_000)
    a.add_argument("--train", type=int, default=10_000, help="training CRPs for the ml attack")
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--workers", type=int, default=1)
    reporting(a)
    a.set_defaults(func=cmd_attack)

    v = sub.add_parser("evaluate", help="security evaluation report")
    v.add_argument("--device", default="device.json")
    v.add_argument("--target-L", dest="target_L", type=float, default=1e-15)
    v.add_argument("--dt-a", dest="dt_a", type=float, default=86400.0)
    v.add_argument("--dt-r", dest="dt_r", type=float, default=1.0)
    v.add_argument("--trials", type=int, default=10_000)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--out-len", dest="out_len", type=int)
    v.add_argument("--salt")
    reporting(v)
    v.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("serve", help="run the verifier")
    s.add_argument("--store", default="crps.txt")
    s.add_argument("--address", required=True, help="host:port")
    s.add_argument("--sessions", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--timeout", type=float, default=5.0)
    s.set_defaults(func=cmd_serve)

    t = sub.add_parser("authenticate", help="run the prover against a verifier")
    t.add_argument("--device", default="device.json")
    t.add_argument("--address", required=True, help="host:port or pipe:")
    t.add_argument("--store", help="store file for the in-process verifier (pipe: only)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--timeout", type=float, default=5.0)
    t.add_argument("--out-len", dest="out_len", type=int)
    t.add_argument("--salt")
    t.set_defaults(func=cmd_authenticate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FamilyFileError, ParamsMismatch) as exc:
        print(f"pufsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ProtocolError, ValueError, PufError) as exc:
        print(f"pufsim: error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
