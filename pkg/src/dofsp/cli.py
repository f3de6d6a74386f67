"""Command-line harness: ``dofsp run | peq | audit | verify-examples``."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from . import audit
from .analysis import TOPOLOGIES, PeqParams, peq_rows, rows_to_csv
from .model import AssumptionViolation, fixture_path, global_profile, load_instances
from .ring import naive_psi_ring, run_ring
from .star import naive_psi_star, psi_download, run_star
from .two_party import MUTATIONS as TWO_PARTY_MUTATIONS
from .two_party import d_psi, naive_psi_two_party, run_two_party

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_AUDIT = 0, 1, 2, 3
RUN_TOPOLOGIES = TOPOLOGIES + ("naive_two_party", "naive_ring", "naive_star")
EXAMPLES = ("example1.json", "example2.json", "example3.json")
DEFAULT_GRID = "K=10;tau=2:10:2;M=1:4"


class UsageError(Exception):
    pass


# --- helpers --------------------------------------------------------------------


def resolve_instance_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = fixture_path(path.name)
    if bundled.exists():
        return bundled
    raise UsageError(f"instance file not found: {name}")


def read_instances(name: str) -> list:
    path = resolve_instance_path(name)
    try:
        return load_instances(path)
    except AssumptionViolation:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def execute(instance, topology: str, seed: int | None = None, mutation: str | None = None):
    from .randomness import SeededRandomness

    rnd = SeededRandomness(instance.seed if seed is None else seed)
    if topology == "two_party":
        return run_two_party(instance, rnd, mutation=mutation, debug=True)
    if topology == "ring":
        return run_ring(instance, rnd, debug=True)
    if topology == "star":
        return run_star(instance, rnd, mutation=mutation, debug=True)
    if topology == "naive_two_party":
        return naive_psi_two_party(instance, rnd)
    if topology == "naive_ring":
        return naive_psi_ring(instance, rnd)
    if topology == "naive_star":
        return naive_psi_star(instance, rnd)
    raise UsageError(f"unknown topology {topology!r}")


def naive_cost(instance, topology: str) -> dict:
    P1 = instance.feasible(instance.leader).size
    if topology == "two_party":
        return {"D": d_psi(P1, instance.databases[instance.non_leaders[0] - 1])}
    if topology == "ring":
        return {"C": 2 * instance.N * instance.K}
    return {"D": psi_download(P1, [instance.databases[i - 1] for i in instance.non_leaders])}


def run_report(instance, topology: str, seed, mutation=None, transcript: bool = False) -> dict:
    out = execute(instance, topology, seed, mutation)
    report = {"instance": instance.name, "topology": topology, **out.summary()}
    report["leader_knowledge"] = instance.alphabet.labels(out.knowledge)
    report["transcript_sha256"] = out.transcript.digest()
    if topology in TOPOLOGIES:
        report["naive"] = naive_cost(instance, topology)
    if transcript:
        report["transcript"] = out.transcript.as_dict()
    return report


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _text_run(report: dict) -> str:
    cost, thm = report["cost"], report["closed_form"]
    lines = [
        f"instance   {report['instance'] or '-'} ({report['topology']}, q={report['q']})",
        f"P*         {{{', '.join(report['solution'])}}}",
        f"R          {report['stopping_round']}",
        "ledger     U={U} D={D} C={C}".format(**cost),
        "formula    " + " ".join(f"{k}={v}" for k, v in thm.items()),
        f"knowledge  {{{', '.join(report['leader_knowledge'])}}}",
        f"sha256     {report['transcript_sha256']}",
    ]
    return "\n".join(lines) + "\n"


# --- grid parsing ---------------------------------------------------------------


def _parse_values(text: str) -> list:
    if "|" in text:
        return [int(v) for v in text.split("|")]
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        if len(parts) != 3 or parts[2] < 1:
            raise UsageError(f"bad range {text!r}")
        return list(range(parts[0], parts[1] + 1, parts[2]))
    return [int(text)]


def parse_grid(text: str, topology: str) -> list:
    """``"K=10;tau=2:10:2;M=1|2"`` to a list of ``PeqParams`` (empty text -> empty grid).

    Ranges are inclusive. Cells violating ``M <= n`` are dropped.
    """
    text = text.strip()
    if not text:
        return []
    axes = {}
    for item in text.replace(",", ";").split(";"):
        if not item.strip():
            continue
        key, _, text = item.partition("=")
        key = key.strip()
        if key not in ("K", "P1", "tau", "M", "N", "Ni"):
            raise UsageError(f"unknown grid axis {key!r}")
        try:
            axes[key] = _parse_values(text.strip())
        except ValueError as exc:
            raise UsageError(f"bad grid values for {key}: {text!r}") from exc
    for needed in ("tau", "M", "K" if topology == "ring" else "P1"):
        if needed not in axes:
            raise UsageError(f"grid needs axis {needed!r} for {topology}")
    keys = list(axes)
    cells = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        c = dict(zip(keys, combo))
        n = c["K"] if topology == "ring" else c["P1"]
        if c["M"] > n:
            continue
        N = c.get("N")
        Ns = ()
        if "Ni" in c:
            Ns = (c["Ni"],) * ((N or (2 if topology == "two_party" else 3)) - 1)
        try:
            cells.append(
                PeqParams(topology, c["tau"], c["M"], P1=c.get("P1"), K=c.get("K"), N=N, Ns=Ns)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return cells


# --- commands -------------------------------------------------------------------


def cmd_run(args) -> int:
    instances = read_instances(args.instance)
    if args.name:
        instances = [i for i in instances if i.name == args.name]
        if not instances:
            raise UsageError(f"no instance named {args.name!r}")
    reports = []
    for inst in instances:
        topology = args.topology or inst.topology
        if topology is None:
            raise UsageError(f"instance {inst.name!r} has no topology; pass --topology")
        reports.append(run_report(inst, topology, args.seed, args.mutate, args.transcript))
    if args.format == "json":
        _emit(json.dumps(reports, indent=2) + "\n", args.out)
    else:
        _emit("\n".join(_text_run(r) for r in reports), args.out)
    return EXIT_OK


def cmd_peq(args) -> int:
    grid = parse_grid(DEFAULT_GRID if args.grid is None else args.grid, args.topology)
    rows = peq_rows(grid, trials=args.trials, seed=args.seed)
    if args.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    else:
        _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def _select_families(args) -> list:
    if args.mutate:
        fams = [f for f in audit.mutation_suite() if f.mutation == args.mutate]
        if not fams:
            raise UsageError(f"unknown mutation {args.mutate!r}")
        return fams
    if args.protocol == "naive":
        return [f for f in audit.naive_suite() if f.protocol.startswith("naive")]
    fams = audit.default_suite()
    if args.multiplier == "per_slot":
        fams = [f for f in fams if not f.name.startswith("star/K3")]
        fams.append(audit.star_three_element_family("per_slot"))
    if args.protocol != "all":
        fams = [f for f in fams if f.protocol == args.protocol]
    return fams


def mutation_sensitivity(budget=None) -> list:
    """The fourth check: every seeded mutation is caught by some other check."""
    results = []
    for fam in audit.mutation_suite():
        caught = [r for r in audit.run_family(fam, budget) if r.verdict == audit.FAIL]
        results.append(
            audit.CheckResult(
                "mutation_sensitivity",
                fam.protocol,
                fam.name,
                audit.PASS if caught else audit.FAIL,
                sum(r.states for r in caught) if caught else 0,
                len(fam.instances),
                notes=[f"caught by {r.check}" for r in caught],
                counterexample=caught[0].counterexample if caught else None,
            )
        )
    return results


def cmd_audit(args) -> int:
    budget = args.budget
    fams = _select_families(args)
    results = audit.run_suite(fams, budget)
    if not args.mutate and args.protocol != "naive":
        results.extend(mutation_sensitivity(budget))
    meta = {"seed": args.seed, "budget": budget or audit.enumeration_budget()}
    meta["nominal_entropy_bits"] = {
        f.name: audit.nominal_entropy_bits(f.protocol, f.instances[-1]) for f in fams if f.instances
    }
    if any(not r.exact for r in results):
        meta["downgrade"] = "enumeration budget exceeded for some family; those checks used seeded sampling"
    failed = [r for r in results if r.verdict == audit.FAIL]
    if args.protocol == "naive":
        leaks = [r for r in failed if r.counterexample and "knowledge" in r.counterexample]
        meta["leakage_index_set"] = [r.counterexample["knowledge"][0] for r in leaks]
        meta["leakage_is_full_support"] = bool(leaks) and all(
            r.counterexample["knowledge"][0] == r.counterexample["leader_support"] for r in leaks
        )
    _emit(audit.report(results, **meta) + "\n", args.out)
    if args.expect_leak:
        return EXIT_OK if failed else EXIT_AUDIT
    return EXIT_AUDIT if failed else EXIT_OK


# --- example verification -------------------------------------------------------


def _phase_download(out, phase: str) -> int:
    me = out.transcript.leader
    return sum(len(m.payload) for m in out.transcript.messages if m.receiver == me and m.phase == phase)


def verify_instance(inst, seed=None) -> list:
    """``[(check, expected, actual, ok)]`` for one annotated instance."""
    topology = inst.topology
    out = execute(inst, topology, seed)
    actual = {
        "solution": out.labels,
        "D": out.D,
        "U": out.U,
        "C": out.C,
        "alpha": out.info.get("alpha"),
        "mu": list(global_profile(inst.objective).mu),
        "round_costs": out.info.get("round_costs"),
        "findpsi_D": _phase_download(out, "findpsi"),
    }
    naive = naive_cost(inst, topology)
    actual["naive_D"] = naive.get("D")
    actual["naive_C"] = naive.get("C")
    rows = []
    for key, want in inst.expected.items():
        if key == "printed_reports":
            continue
        got = actual.get(key)
        rows.append((key, want, got, got == want))
    for key, want in inst.expected.get("printed_reports", {}).items():
        rows.append((f"{key} (printed)", want, actual.get(key), actual.get(key) == want))
    return rows


def cmd_verify(args) -> int:
    names = [args.instance] if args.instance else list(EXAMPLES)
    failed = False
    lines = []
    report = []
    for name in names:
        for inst in read_instances(name):
            for key, want, got, ok in verify_instance(inst, args.seed):
                printed = key.endswith("(printed)")
                failed |= not ok and not printed
                status = "ok" if ok else ("differs" if printed else "MISMATCH")
                lines.append(f"{inst.name:18s} {key:18s} expected={want!s:14s} actual={got!s:14s} {status}")
                report.append({"instance": inst.name, "check": key, "expected": want, "actual": got, "status": status})
    if args.format == "json":
        _emit(json.dumps(report, indent=2, default=str) + "\n", args.out)
    else:
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_AUDIT if failed else EXIT_OK


# --- entry point ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dofsp", description="Private distributed optimization over feasible sets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute a protocol on instance files")
    run.add_argument("--instance", required=True, help="JSON instance file or bundled example name")
    run.add_argument("--name", help="only the instance with this name")
    run.add_argument("--topology", choices=RUN_TOPOLOGIES)
    run.add_argument("--seed", type=int, help="override each instance's seed")
    run.add_argument("--mutate", choices=TWO_PARTY_MUTATIONS + ("reveal-count",))
    run.add_argument("--transcript", action="store_true", help="include the full transcript")
    run.add_argument("--format", choices=("json", "text"), default="text")
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    peq = sub.add_parser("peq", help="P_eq table as CSV")
    peq.add_argument("--topology", choices=TOPOLOGIES, default="ring")
    peq.add_argument("--grid", help=f"axes like {DEFAULT_GRID!r}; empty string for an empty table")
    peq.add_argument("--trials", type=int, default=0)
    peq.add_argument("--seed", type=int, default=0)
    peq.add_argument("--format", choices=("csv", "json"), default="csv")
    peq.add_argument("--out")
    peq.set_defaults(func=cmd_peq)

    aud = sub.add_parser("audit", help="exhaustive privacy and reliability audit")
    aud.add_argument("--protocol", choices=("all", "two_party", "ring", "star", "naive"), default="all")
    aud.add_argument("--mutate", choices=TWO_PARTY_MUTATIONS + ("reveal-count",))
    aud.add_argument("--multiplier", choices=("global", "per_slot"), default="global")
    aud.add_argument("--expect-leak", action="store_true", help="succeed only if a leak is found")
    aud.add_argument("--budget", type=int, help="randomness states per instance")
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--format", choices=("json",), default="json")
    aud.add_argument("--out")
    aud.set_defaults(func=cmd_audit)

    ver = sub.add_parser("verify-examples", help="check bundled examples against their annotations")
    ver.add_argument("--instance")
    ver.add_argument("--seed", type=int)
    ver.add_argument("--format", choices=("json", "text"), default="text")
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"dofsp: {exc}\n")
        return EXIT_USAGE
    except AssumptionViolation as exc:
        sys.stderr.write(f"dofsp: assumption violated: {exc}\n")
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    raise SystemExit(main())
