"""Command-line front end: run, explain, reduce, generate and bench.

A query spec is a JSON document::

    {
      "relations": [
        {"name": "S1", "csv": "S1.csv", "weight_column": "weight"},
        {"name": "S2", "csv": "S2.csv", "weight": 1.0}
      ],
      "atoms": ["S1", "S2"],
      "predicates": [
        {"kind": "<", "left": "S1.A2", "right": "S2.A3"}
      ],
      "direction": "min",
      "k": 10,
      "method": "auto"
    }

CSV paths are relative to the spec file. ``atoms`` defaults to the relation
order; an atom may be ``{"alias": "R2", "relation": "R"}`` for a self-join.
A predicate is one atom object, a list of atoms (a conjunction) or a list of
such lists (a disjunction of conjunctions). Kinds are ``= < > <= >= !=`` and
``band`` (which needs ``epsilon``).
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .csvio import load_relation, write_relation, write_rows
from .enumgraph import assemble
from .equi import materialize_chain
from .errors import (GuardExceededError, InvalidPredicateError, ReductionUnsupportedError,
                     SchemaError, UnsupportedMethodError)
from .model import AtomicPredicate, AttrRef, Direction, JoinQuery, PredicateDNF, PredKind
from .plan import Outcome, assign_predicates
from .workbench import (ENGINES, TEMPLATES, gen_items, gen_points, gen_synthetic, measure,
                        stream_answers)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_SCHEMA = 3
EXIT_UNSUPPORTED = 4

FLUSH_EVERY = 1024


class SpecError(ValueError):
    """The query spec is malformed (as opposed to not matching the data)."""


@dataclass
class QuerySpec:
    query: JoinQuery
    k: int | None = None
    method: str = "auto"


# -- spec parsing ---------------------------------------------------------------

def _parse_atom(obj) -> AtomicPredicate:
    if not isinstance(obj, dict):
        raise SpecError(f"predicate atom must be an object, got {obj!r}")
    try:
        kind = PredKind(obj["kind"])
        left, right = obj["left"], obj["right"]
    except KeyError as e:
        raise SpecError(f"predicate atom misses {e.args[0]!r}") from None
    except ValueError:
        raise SpecError(f"unknown predicate kind {obj.get('kind')!r}") from None
    eps = obj.get("epsilon")
    try:
        return AtomicPredicate(kind, AttrRef.parse(left), AttrRef.parse(right),
                               None if eps is None else float(eps))
    except InvalidPredicateError as e:
        raise SpecError(str(e)) from None


def parse_predicate(obj) -> PredicateDNF:
    """One atom, a conjunction (list of atoms) or a DNF (list of lists of atoms)."""
    if isinstance(obj, dict):
        return PredicateDNF.of(_parse_atom(obj))
    if isinstance(obj, list) and obj:
        if all(isinstance(x, dict) for x in obj):
            return PredicateDNF.of(*[_parse_atom(x) for x in obj])
        if all(isinstance(x, list) and x for x in obj):
            return PredicateDNF.any_of(*[tuple(_parse_atom(a) for a in conj) for conj in obj])
    raise SpecError(f"cannot read predicate {obj!r}")


def load_spec(path: str | Path) -> QuerySpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: {e}") from None
    if not isinstance(doc, dict) or "relations" not in doc:
        raise SpecError(f"{path}: expected an object with a 'relations' list")
    base = path.parent
    rels = {}
    for r in doc["relations"]:
        if not isinstance(r, dict) or "name" not in r or "csv" not in r:
            raise SpecError(f"relation entries need 'name' and 'csv': {r!r}")
        if r["name"] in rels:
            raise SchemaError(f"relation {r['name']} declared twice")
        rels[r["name"]] = load_relation(r["name"], base / r["csv"], r.get("weight_column"),
                                        r.get("weight"))
    atoms = []
    for a in doc.get("atoms", list(rels)):
        if isinstance(a, str):
            alias, src = a, a
        elif isinstance(a, dict) and "alias" in a and "relation" in a:
            alias, src = a["alias"], a["relation"]
        else:
            raise SpecError(f"cannot read atom {a!r}")
        if src not in rels:
            raise SchemaError(f"atom refers to unknown relation {src!r}")
        atoms.append(rels[src] if alias == src else rels[src].copy(alias))
    preds = [parse_predicate(p) for p in doc.get("predicates", [])]
    try:
        direction = Direction(doc.get("direction", "min"))
    except ValueError:
        raise SpecError(f"direction must be 'min' or 'max', got {doc.get('direction')!r}") from None
    k = doc.get("k")
    if k is not None and (not isinstance(k, int) or k < 0):
        raise SpecError(f"k must be a non-negative integer, got {k!r}")
    q = JoinQuery(atoms, preds, direction)
    for dnf in preds:
        for p in dnf.atoms:
            for ref in (p.left, p.right):
                q.relation(ref.relation).position(ref.attribute)
    return QuerySpec(q, k, doc.get("method", "auto"))


# -- commands -------------------------------------------------------------------

def _header(q: JoinQuery) -> list[str]:
    return [f"{r.name}.{a}" for r in q.atoms for a in r.attributes] + ["weight"]


def _rows(q: JoinQuery, answers):
    for a in answers:
        row: list[float] = []
        for rel, tid in zip(q.atoms, a.choice):
            row.extend(rel.rows[tid])
        row.append(a.weight)
        yield row


def cmd_run(args) -> int:
    spec = load_spec(args.query)
    q = spec.query
    k = args.k if args.k is not None else spec.k
    method = args.method or spec.method
    if method not in ENGINES:
        raise UnsupportedMethodError(f"unknown method {method!r}")
    info: dict = {}
    start = time.perf_counter()
    stream = stream_answers(q, method, ranked=not args.unranked, info=info)
    times: list[float] = []

    def limited():
        if k == 0:
            return
        for i, a in enumerate(stream, start=1):
            times.append(time.perf_counter() - start)
            yield a
            if k is not None and i >= k:
                return

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        n = write_rows(out, _header(q), _rows(q, limited()), FLUSH_EVERY)
    finally:
        if args.out:
            out.close()
    if args.stats:
        gaps = [b - a for a, b in zip([0.0] + times, times)]
        report = {
            "answers": n,
            "method": method,
            "ranked": not args.unranked,
            "outcome": info.get("outcome"),
            "graph_size": info.get("graph_size"),
            "tt_first": times[0] if times else None,
            "tt_last": times[-1] if times else None,
            "delay_mean": statistics.fmean(gaps[1:]) if len(gaps) > 1 else None,
            "delay_max": max(gaps[1:]) if len(gaps) > 1 else None,
        }
        Path(args.stats).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def explain(q: JoinQuery, method: str = "auto") -> dict:
    """Plan, per-edge TLFG statistics and enumeration graph size as a dict."""
    plan = assign_predicates(q)
    report: dict = {"outcome": plan.outcome.value, "atoms": [r.name for r in q.atoms]}
    if plan.outcome is Outcome.NO_TREE:
        return report
    g = assemble(q, plan.tree, method)
    report["root"] = q.atoms[plan.tree.root].name
    report.update(g.explain())
    report["residual"] = [str(r) for r in plan.residual]
    return report


def cmd_explain(args) -> int:
    spec = load_spec(args.query)
    rep = explain(spec.query, args.method or spec.method)
    if args.json:
        sys.stdout.write(json.dumps(rep, indent=2) + "\n")
        return EXIT_OK
    lines = [f"outcome: {rep['outcome']}"]
    if "edges" in rep:
        lines.append(f"root: {rep['root']}")
        if not rep["edges"]:
            lines.append("tree: single node")
        for e in rep["edges"]:
            lines.append(f"edge {e['parent']} -> {e['child']}: {e['condition']}")
            lines.append(f"  tlfg size={e['size']} depth={e['depth']} "
                         f"duplication={e['duplication']} distinct_values={e['distinct_values']}")
        for r in rep["residual"]:
            lines.append(f"residual: {r}")
        lines.append(f"layers={rep['layers']} |V|={rep['vertices']} |E|={rep['edge_count']}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_reduce(args) -> int:
    spec = load_spec(args.query)
    q = spec.query
    plan = assign_predicates(q)
    if plan.outcome is Outcome.NO_TREE:
        raise UnsupportedMethodError("query admits no theta-join tree")
    method = args.method or "binary"
    g = assemble(q, plan.tree, method, prune=False)
    out = Path(args.out)
    for p, c in plan.tree.edges:
        S, T = q.atoms[p], q.atoms[c]
        chain = materialize_chain(g.tlfgs[c], S, T)
        for path in chain.to_csv(out, prefix=f"{S.name}_{T.name}_E"):
            print(path)
    return EXIT_OK


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "synthetic":
        rels = gen_synthetic(args.n, args.ell, args.seed)
    elif args.kind == "items":
        rels = gen_items(args.n, args.ell, args.seed)
    else:
        rels = gen_points(args.n, args.seed, args.ell)
    entries = []
    for r in rels:
        write_relation(r, out / f"{r.name}.csv")
        entries.append({"name": r.name, "csv": f"{r.name}.csv", "weight_column": "weight"})
        print(out / f"{r.name}.csv")
    if args.template:
        q = TEMPLATES[args.template](rels)
        doc = {"relations": entries, "atoms": [r.name for r in rels],
               "predicates": [_dnf_json(d) for d in q.predicates],
               "direction": q.direction.value}
        (out / "query.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(out / "query.json")
    return EXIT_OK


def _atom_json(p: AtomicPredicate) -> dict:
    if not (p.left.is_plain and p.right.is_plain):
        raise SpecError("only plain attribute references can be written to a spec")
    d = {"kind": p.kind.value, "left": f"{p.left.relation}.{p.left.attribute}",
         "right": f"{p.right.relation}.{p.right.attribute}"}
    if p.epsilon is not None:
        d["epsilon"] = p.epsilon
    return d


def _dnf_json(dnf: PredicateDNF):
    conjs = [[_atom_json(p) for p in c] for c in dnf.disjuncts]
    return conjs[0] if len(conjs) == 1 else conjs


SUITES = {
    # name: (template, generator, sizes, ell, methods)
    "smoke": ("QS1", "synthetic", [2 ** 8, 2 ** 9], 2, ["binary", "multiway", "shared", "quadequi", "batch"]),
    "s1": ("QS1", "synthetic", [2 ** 12, 2 ** 14, 2 ** 16], 2, ["binary", "multiway", "shared", "batch"]),
    "s2": ("QS2", "synthetic", [2 ** 10, 2 ** 12, 2 ** 14], 3, ["binary", "multiway", "batch"]),
    "t": ("QT", "items", [2 ** 10, 2 ** 12], 3, ["binary", "multiway", "batch"]),
    "b": ("QB", "points", [2 ** 10, 2 ** 12], 2, ["binary", "multiway", "batch"]),
}

BENCH_FIELDS = ["query", "method", "n", "k", "tt_k", "delay_mean", "delay_max", "graph_size", "status"]


def bench_rows(suite: str, seed: int, checkpoints: Sequence[int]):
    template, gen, sizes, ell, methods = SUITES[suite]
    for n in sizes:
        if gen == "synthetic":
            rels = gen_synthetic(n, ell, seed)
        elif gen == "items":
            rels = gen_items(n, ell, seed)
        else:
            rels = gen_points(n, seed)
        q = TEMPLATES[template](rels)
        for method in methods:
            info: dict = {}
            status = "ok"
            try:
                rep = measure(lambda: stream_answers(q, method, info=info), checkpoints)
            except (GuardExceededError, MemoryError) as e:
                status = f"aborted: {e}"
                rep = None
            if rep is None or not rep.tt_k:
                yield [template, method, n, "", "", "", "", info.get("graph_size", ""),
                       status if rep is None else "no answers"]
                continue
            for k, tt in rep.tt_k.items():
                d = rep.delay[1:k] or [0.0]
                yield [template, method, n, k, f"{tt:.6f}", f"{statistics.fmean(d):.3e}",
                       f"{max(d):.3e}", info.get("graph_size", ""), status]


def cmd_bench(args) -> int:
    import csv
    checkpoints = sorted(set(args.checkpoints))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(BENCH_FIELDS)
        for row in bench_rows(args.suite, args.seed, checkpoints):
            w.writerow(row)
            out.flush()
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankjoin", description="Ranked enumeration of theta-join queries.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="enumerate answers of a query spec as CSV")
    run.add_argument("--query", required=True, metavar="PATH", help="JSON query spec")
    run.add_argument("--k", type=int, default=None, help="stop after k answers (default: all)")
    run.add_argument("--method", choices=ENGINES, default=None)
    run.add_argument("--unranked", action="store_true", help="any order, no priority queue")
    run.add_argument("--out", metavar="PATH", help="output CSV (default: stdout)")
    run.add_argument("--stats", metavar="PATH", help="write timing statistics as JSON")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("explain", help="show the join tree and factorization graph sizes")
    exp.add_argument("--query", required=True, metavar="PATH")
    exp.add_argument("--method", choices=ENGINES[:5], default=None)
    exp.add_argument("--json", action="store_true", help="machine-readable output")
    exp.set_defaults(func=cmd_explain)

    red = sub.add_parser("reduce", help="write each tree edge as equi-join edge relations (CSV)")
    red.add_argument("--query", required=True, metavar="PATH")
    red.add_argument("--method", choices=("binary", "multiway", "direct", "shared"), default=None)
    red.add_argument("--out", required=True, metavar="DIR")
    red.set_defaults(func=cmd_reduce)

    gen = sub.add_parser("generate", help="write synthetic relations as CSV")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--ell", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--kind", choices=("synthetic", "items", "points"), default="synthetic")
    gen.add_argument("--template", choices=sorted(TEMPLATES), default=None,
                     help="also write query.json for this template")
    gen.add_argument("--out", required=True, metavar="DIR")
    gen.set_defaults(func=cmd_generate)

    ben = sub.add_parser("bench", help="time canned suites, one CSV row per (query, method, n, k)")
    ben.add_argument("--suite", choices=sorted(SUITES), default="smoke")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--checkpoints", type=int, nargs="+", default=[1, 10, 100, 1000])
    ben.add_argument("--out", metavar="PATH")
    ben.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, InvalidPredicateError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except (UnsupportedMethodError, ReductionUnsupportedError) as e:
        print(f"unsupported: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (OSError, GuardExceededError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
