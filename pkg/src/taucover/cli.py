"""Command-line front end.

Every command prints human-readable lines followed by one JSON line with the
machine-readable result (including the seed of randomized checks).  Errors
print a JSON line with their category and exit with 2 (parse), 3
(precondition), 4 (budget) or 5 (inconclusive).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from typing import Sequence

from .covering import (build_window, check_homogeneous, covering_check, lift_pair, lift_via_domain,
                       lift_walk, load_grading, orbit_mutate, push_down, push_down_stage,
                       push_down_tower, string_module, tower_windows, verify_commute)
from .errors import TauCoverError
from .groups import Tower
from .linalg import GF, QQ
from .modules import is_isomorphic, load_module, tau
from .quiver import fundamental_group, load_algebra, parse_walk
from .tilting import mutation_quiver, seed_pair

SHAPES = {3: "triangle", 4: "square", 5: "pentagon", 6: "hexagon"}


def data_path(name: str) -> str:
    return str(resources.files("taucover") / "data" / name)


def _emit(out, record: dict) -> None:
    out.write(json.dumps(record, sort_keys=True, default=str) + "\n")


def _field(spec: str):
    return QQ if spec in ("0", "Q", "QQ") else GF(int(spec))


def _algebra(args):
    return load_algebra(args.algebra, _field(args.field))


# ---------------------------------------------------------------------------
# commands


def cmd_algebra_check(args, out) -> int:
    bq = _algebra(args)
    N = bq.nilpotency
    dim = bq.dim()
    pi = fundamental_group(bq)
    out.write(f"admissible, dim {dim}, pi1 {pi.profile} rank {pi.rank}\n")
    _emit(out, {"command": "algebra check", "status": "ok", "admissible": True, "nilpotency": N,
                "dim": dim, "pi1": pi.profile, "rank": pi.rank})
    return 0


def cmd_module_tau(args, out) -> int:
    bq = _algebra(args)
    M = load_module(args.module, bq)
    T = tau(M)
    out.write(T.to_text(f"tau of {args.module}"))
    _emit(out, {"command": "module tau", "status": "ok", "dim_vector": list(M.dim_vector()),
                "tau_dim_vector": list(T.dim_vector())})
    return 0


def exchange_shape(mq) -> str:
    n = len(mq.nodes)
    adj = {i: set() for i in range(n)}
    for i, j, _, _ in mq.edges:
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    if n in SHAPES and all(len(a) == 2 for a in adj.values()):
        seen, stack = {0}, [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        if len(seen) == n:
            return SHAPES[n]
    return ""


def cmd_tautilt_enumerate(args, out) -> int:
    bq = _algebra(args)
    mq = mutation_quiver(seed_pair(bq), args.budget, args.seed)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(mq.to_dot())
    for i, p in enumerate(mq.nodes):
        out.write(f"  [{i}] {p.label()}\n")
    if not mq.complete:
        out.write(f"more than {args.budget} pairs; enumeration stopped\n")
        _emit(out, {"command": "tautilt enumerate", "status": "unknown-exceeded", "budget": args.budget,
                    "seed": args.seed})
        return 4
    shape = exchange_shape(mq)
    out.write(f"{len(mq.nodes)} pairs" + (f", {shape}" if shape else "") + "\n")
    _emit(out, {"command": "tautilt enumerate", "status": "finite", "pairs": len(mq.nodes),
                "hasse_edges": mq.hasse_edges(), "shape": shape, "seed": args.seed})
    return 0


def _window(args):
    bq = _algebra(args)
    g = load_grading(args.grading, bq)
    center = args.center if args.center is not None else bq.vertices[0]
    return g, build_window(g, center, args.radius)


def cmd_cover_window(args, out) -> int:
    g, cw = _window(args)
    hom = check_homogeneous(g)
    rep = covering_check(cw)
    interior = [str(v) for v in cw.vertices if cw.is_interior(v)]
    out.write(f"{len(cw.vertices)} vertices, {len(cw.bq.arrows)} arrows, {len(cw.bq.relations)} relations\n")
    out.write("interior: " + " ".join(interior) + "\n")
    for v, why in rep.failures:
        out.write(f"covering check fails at {v}: {why}\n")
    _emit(out, {"command": "cover window", "status": "ok" if rep.ok else "covering-failure",
                "vertices": [str(v) for v in cw.vertices], "interior": interior, "homogeneous": hom.ok,
                "covering_ok": rep.ok})
    return 0


def cmd_cover_pushdown(args, out) -> int:
    g, cw = _window(args)
    M = load_module(args.module, cw.bq)
    D = push_down(M, cw)
    out.write(D.to_text(args.algebra))
    _emit(out, {"command": "cover pushdown", "status": "ok", "dim_vector": list(D.dim_vector())})
    return 0


def cmd_cover_lift_string(args, out) -> int:
    g, cw = _window(args)
    walk = parse_walk(args.walk, g.base.quiver)
    start = cw.find_vertex(args.start) if args.start else None
    lifted = lift_walk(walk, cw, start)
    M = string_module(g.base, walk)
    L = string_module(cw.bq, lifted)
    iso = is_isomorphic(push_down(L, cw), M, args.seed)
    labels = [str(v) for v in lifted.vertices(cw.bq.quiver)]
    out.write("lifted walk visits " + " ".join(labels) + "\n")
    out.write(f"push-down isomorphic to the string module: {iso.verdict}\n")
    _emit(out, {"command": "cover lift-string", "status": "ok", "vertices": labels,
                "pushdown_iso": iso.verdict, "seed": args.seed})
    return 0 if iso.verdict == "yes" else 5


def cmd_cover_mutate_orbit(args, out) -> int:
    g, cw = _window(args)
    p = seed_pair(g.base)
    q = lift_pair(p, cw)
    history = []
    for k in args.positions:
        step = orbit_mutate(q, k, args.seed)
        q = step.pair
        history.append({"position": k, "direction": step.direction, "multiplicity": step.multiplicity,
                        "translates": [str(t) for t in step.translates]})
        out.write(f"mutate at {k} ({step.direction}): {q.label()}\n")
    down = q.push_down()
    out.write(f"push-down: {down.label()}\n")
    _emit(out, {"command": "cover mutate-orbit", "status": "ok", "steps": history, "orbit_pair": q.label(),
                "pushdown": down.label(), "seed": args.seed})
    return 0


def cmd_cover_verify_commute(args, out) -> int:
    bq = _algebra(args)
    g = load_grading(args.grading, bq)
    rep = verify_commute(g, None, args.depth, args.center, args.radius, args.seed)
    if rep.ok:
        out.write(f"success: {rep.nodes} nodes, {rep.checks} checks, depth {args.depth}, radius {rep.radius}\n")
    else:
        out.write(f"divergence: {rep.failure}\n")
    _emit(out, {"command": "cover verify-commute", "status": "ok" if rep.ok else "divergence",
                "nodes": rep.nodes, "checks": rep.checks, "radius": rep.radius, "failure": rep.failure,
                "seed": args.seed})
    return 0 if rep.ok else 1


# ---------------------------------------------------------------------------
# the worked example


U_WALK = "c^-1 e a d^-1 b"
U1_LABELS = ["2_0", "3_0", "1_0", "2_0", "4_1", "3_1"]


def worked_example(seed: int = 0) -> list[tuple[str, bool]]:
    """Run the string-module scenario on the four-vertex example; returns named checks."""
    A = load_algebra(data_path("example.quiver"))
    checks = []
    pi = fundamental_group(A)
    checks.append(("dim 11 and pi1 free of rank 2", A.dim() == 11 and pi.profile == "free" and pi.rank == 2))
    u = parse_walk(U_WALK, A.quiver)
    Mu = string_module(A, u)
    checks.append(("M(u) has dimension vector (1,2,2,1)", Mu.dim_vector() == (1, 2, 2, 1)))

    gz = load_grading(data_path("example_z.grading"), A)
    W = build_window(gz, "2", 9)
    u1 = lift_walk(u, W)
    M1 = string_module(W.bq, u1)
    labels = [str(v) for v in u1.vertices(W.bq.quiver)]
    checks.append(("u1 visits " + " ".join(U1_LABELS), labels == U1_LABELS))
    checks.append(("F1 push-down of M(u1) = M(u)", bool(is_isomorphic(push_down(M1, W), Mu, seed))))

    gf = load_grading(data_path("example_free.grading"), A)
    tower = Tower(gf.group, choices=["v", "u"])
    W1, W2 = tower_windows(gf, tower, 2, "2", [12, 9])
    u2 = lift_walk(lift_walk(u, W1), W2)
    M2 = string_module(W2.bq, u2)
    checks.append(("F2 push-down of M(u2) = M(u)", bool(is_isomorphic(push_down_tower(M2, [W1, W2]), Mu, seed))))

    G = build_window(gf, "2", 8)
    N = lift_via_domain(M2, W2, G, tower, 2)
    ok = bool(is_isomorphic(push_down_stage(N, W2, tower, 2), M2, seed))
    ok = ok and bool(is_isomorphic(push_down(N, G), Mu, seed))
    checks.append(("lift via F2 domain", ok))
    return checks


def cmd_worked_example(args, out) -> int:
    checks = worked_example(args.seed)
    for name, ok in checks:
        out.write(f"{'PASS' if ok else 'FAIL'} {name}\n")
    good = all(ok for _, ok in checks)
    if good:
        out.write("OK: F1 push-down of M(u1) = M(u); F2 push-down of M(u2) = M(u); lift via F2 domain OK\n")
    else:
        out.write("FAILED: " + "; ".join(n for n, ok in checks if not ok) + "\n")
    _emit(out, {"command": "paper-example", "status": "ok" if good else "failed",
                "checks": {n: ok for n, ok in checks}, "seed": args.seed})
    return 0 if good else 1


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="taucover", description="tau-tilting theory and Galois coverings")
    ap.add_argument("--field", default="0", help="0 for the rationals (default) or a prime p")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized isomorphism tests")
    sub = ap.add_subparsers(dest="group", required=True)

    alg = sub.add_parser("algebra").add_subparsers(dest="verb", required=True)
    p = alg.add_parser("check", help="admissibility, dimension and fundamental group")
    p.add_argument("algebra")
    p.set_defaults(run=cmd_algebra_check)

    mod = sub.add_parser("module").add_subparsers(dest="verb", required=True)
    p = mod.add_parser("tau", help="Auslander-Reiten translate of a module")
    p.add_argument("algebra")
    p.add_argument("module")
    p.set_defaults(run=cmd_module_tau)

    tt = sub.add_parser("tautilt").add_subparsers(dest="verb", required=True)
    p = tt.add_parser("enumerate", help="support tau-tilting pairs by mutation")
    p.add_argument("algebra")
    p.add_argument("--dot", help="write the Hasse quiver in DOT format")
    p.add_argument("--budget", type=int, default=1000)
    p.set_defaults(run=cmd_tautilt_enumerate)

    cov = sub.add_parser("cover").add_subparsers(dest="verb", required=True)

    def window_args(q, radius=6):
        q.add_argument("algebra")
        q.add_argument("grading")
        q.add_argument("--center")
        q.add_argument("--radius", type=int, default=radius)

    p = cov.add_parser("window", help="build a window of the cover and check it")
    window_args(p)
    p.set_defaults(run=cmd_cover_window)
    p = cov.add_parser("pushdown", help="push a window module down to the base")
    window_args(p)
    p.add_argument("module")
    p.set_defaults(run=cmd_cover_pushdown)
    p = cov.add_parser("lift-string", help="lift a string walk (composition order, e.g. 'a d^-1 b')")
    window_args(p, 9)
    p.add_argument("--walk", required=True)
    p.add_argument("--start", help="label of the fiber vertex to start from")
    p.set_defaults(run=cmd_cover_lift_string)
    p = cov.add_parser("mutate-orbit", help="mutate the lift of (A, 0) along positions")
    window_args(p, 10)
    p.add_argument("--positions", type=lambda s: [int(x) for x in s.split(",") if x], default=[0])
    p.set_defaults(run=cmd_cover_mutate_orbit)
    p = cov.add_parser("verify-commute", help="lockstep mutation downstairs and upstairs")
    p.add_argument("algebra")
    p.add_argument("grading")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--center")
    p.add_argument("--radius", type=int)
    p.set_defaults(run=cmd_cover_verify_commute)

    p = sub.add_parser("paper-example", help="run the string-module scenario on the bundled example")
    p.set_defaults(run=cmd_worked_example)
    return ap


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.run(args, out)
    except TauCoverError as exc:
        sys.stderr.write(f"error ({exc.category}): {exc}\n")
        _emit(out, {"status": "error", "category": exc.category, "message": str(exc)})
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error (io): {exc}\n")
        _emit(out, {"status": "error", "category": "io", "message": str(exc)})
        return 2


if __name__ == "__main__":
    sys.exit(main())
