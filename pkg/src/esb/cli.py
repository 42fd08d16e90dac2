"""Command line front end: bound computation, basic relaxations, generators.

Exit codes: 0 success, 2 parse error, 3 solver failure.  The environment
variable ESB_THREADS caps separation parallelism.
"""

import argparse
import sys

from . import driver, graphs, sdp_oracle

PROBLEMS = ("maxcut", "stableset", "coloring")


def _read_graph(path, fmt):
    with open(path) as fh:
        text = fh.read()
    if fmt == "auto":
        fmt = "edgelist"
        for line in text.splitlines():
            s = line.strip()
            if not s or s.startswith("c"):
                continue
            fmt = "dimacs" if s.startswith("p") or s.startswith("e") else "edgelist"
            break
    name = path.rsplit("/", 1)[-1]
    if fmt == "dimacs":
        return graphs.parse_dimacs(text, name=name)
    return graphs.parse_weighted_edge_list(text, name=name)


def _add_graph_args(sub):
    sub.add_argument("--problem", required=True, choices=PROBLEMS)
    sub.add_argument("--graph", required=True, help="instance file")
    sub.add_argument("--format", default="auto", choices=("auto", "dimacs", "edgelist"))


def build_parser():
    ap = argparse.ArgumentParser(prog="esb", description=__doc__.splitlines()[0])
    sp = ap.add_subparsers(dest="command", required=True)

    solve = sp.add_parser("solve", help="compute the exact subgraph bound")
    _add_graph_args(solve)
    solve.add_argument("--max-order", type=int, default=8)
    solve.add_argument("--cycles", type=int, default=None)
    solve.add_argument("--escs-per-cycle", type=int, default=None)
    solve.add_argument("--cut-mode", default="auto", choices=("auto", "esc", "cut"))
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--bundle-iters", type=int, default=30)
    solve.add_argument("--bundle-tol", type=float, default=0.005)
    solve.add_argument("--report", default=None, help="write JSON report here")
    solve.add_argument("--progress", default=None, help="write CSV progress here")

    basic = sp.add_parser("basic", help="solve the basic relaxation only")
    _add_graph_args(basic)

    gen = sp.add_parser("gen", help="generate an instance (weighted edge list)")
    gen.add_argument("--model", required=True, choices=("er", "torus", "regular"))
    gen.add_argument("--n", type=int, help="vertices (er, regular)")
    gen.add_argument("--p", type=float, help="edge probability (er)")
    gen.add_argument("--d", type=int, help="grid side (torus)")
    gen.add_argument("--r", type=int, help="target degree (regular)")
    gen.add_argument("--weights", default="unit", choices=("unit", "pm1"))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None, help="output path (default stdout)")
    return ap


def _cmd_solve(args):
    graph = _read_graph(args.graph, args.format)
    params = driver.EsbParams(
        problem=args.problem, max_order=args.max_order, max_cycles=args.cycles,
        escs_per_cycle=args.escs_per_cycle, cut_mode=args.cut_mode,
        seed=args.seed, bundle_max_iter=args.bundle_iters,
        bundle_rel_tol=args.bundle_tol)
    report = driver.compute_esb(graph, params)
    print(f"graph {report.graph_name}: n={report.n} m={report.m}")
    print(f"basic relaxation: {report.basic_value:.6f}")
    print(f"heuristic value:  {report.heuristic_value}")
    print(f"final bound:      {report.final_bound:.6f} "
          f"({len(report.cycles)} cycles)")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(driver.emit_report(report, "json"))
    if args.progress:
        with open(args.progress, "w") as fh:
            fh.write(driver.emit_report(report, "csv"))
    return 3 if report.failed else 0


def _cmd_basic(args):
    graph = _read_graph(args.graph, args.format)
    prob = sdp_oracle.build_basic_relaxation(args.problem, graph)
    sol = sdp_oracle.solve_sdp(prob)
    print(f"{sol.value:.6f}")
    return 0


def _cmd_gen(args):
    if args.model == "torus":
        if args.d is None:
            raise ValueError("torus model needs --d")
        graph = graphs.gen_torus(args.d)
    elif args.model == "regular":
        if args.n is None or args.r is None:
            raise ValueError("regular model needs --n and --r")
        graph = graphs.gen_near_regular(args.n, args.r, args.seed)
    else:
        if args.n is None or args.p is None:
            raise ValueError("er model needs --n and --p")
        graph = graphs.gen_erdos_renyi(args.n, args.p, args.seed, weights=args.weights)
    text = graphs.write_weighted_edge_list(graph)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "basic":
            return _cmd_basic(args)
        return _cmd_gen(args)
    except (graphs.ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except sdp_oracle.SdpError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
