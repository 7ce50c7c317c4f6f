"""The `lab` command line tool.

Every subcommand reads/writes the package's plain-text formats and supports
`--json` for a single machine-readable object on stdout. Exit codes: 0 on
success, 1 on domain errors (bad files, unsatisfiable requests), 2 on usage
errors. Diagnostics go to stderr, never to the data stream.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments
from ._rng import check_seed
from .constraint_graph import arboricity, build_constraint_graph
from .embedding import Embedding
from .errors import InvalidParameterError, LabError
from .evaluation import evaluate_accuracy, satisfied_count, trivial_baseline
from .instances import (
    default_points_path,
    generate_ground_truth_sphere,
    generate_poisson_quadruplets,
    generate_poisson_triplets,
    generate_uniform_quadruplets,
    generate_uniform_triplets,
    read_instance,
    read_points,
    write_instance,
    write_points,
)
from .mas import (
    brute_force_mas,
    extract_permutation,
    random_permutation_baseline,
    read_digraph,
    reduce_mas_to_triplets,
)
from .realizability import certify, complete_ordering, embed_from_ordering
from .training import TrainConfig, train


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(text)


def _cmd_gen(args) -> int:
    seed = check_seed(args.seed)
    model = args.model
    if model in ("uniform", "sphere", "quad-uniform") and args.m is None:
        raise InvalidParameterError(f"--m is required for model {model}")
    if model in ("poisson", "quad-poisson") and args.lam is None:
        raise InvalidParameterError(f"--lambda is required for model {model}")
    if model == "sphere" and args.D is None:
        raise InvalidParameterError("--D is required for model sphere")
    if model == "uniform":
        inst = generate_uniform_triplets(args.n, args.m, seed)
    elif model == "poisson":
        inst = generate_poisson_triplets(args.n, args.lam, seed)
    elif model == "sphere":
        inst = generate_ground_truth_sphere(args.n, args.D, args.m, seed)
    elif model == "quad-uniform":
        inst = generate_uniform_quadruplets(args.n, args.m, seed)
    else:
        inst = generate_poisson_quadruplets(args.n, args.lam, seed)
    write_instance(args.out, inst)
    points_path = default_points_path(args.out) if model == "sphere" else None
    payload = {
        "path": args.out,
        "points_path": points_path,
        "model": model,
        "n": inst.n,
        "m": inst.m,
        "seed": seed,
    }
    _emit(args, payload, f"wrote {inst.m} constraints on {inst.n} items to {args.out}")
    return 0


def _cmd_check(args) -> int:
    inst = read_instance(args.file)
    cert = certify(inst)
    payload = {
        "status": cert.status,
        "witness_cycle": cert.witness_cycle,
        "pairs": int(cert.ordering.shape[0]) if cert.ordering is not None else None,
        "constraints": inst.m,
    }
    if args.json:
        print(json.dumps(payload))
    else:
        print("REALIZABLE" if cert.realizable else "UNREALIZABLE")
        if args.witness and cert.witness_cycle is not None:
            print("witness cycle (constraint indices): " + " ".join(map(str, cert.witness_cycle)))
    return 0


def _cmd_embed(args) -> int:
    inst = read_instance(args.file)
    cert = certify(inst)
    if not cert.realizable:
        raise LabError(
            "instance is unrealizable; witness cycle: "
            + " ".join(map(str, cert.witness_cycle or []))
        )
    emb = embed_from_ordering(inst.n, complete_ordering(inst.n, cert.ordering))
    write_points(args.out, emb.coords)
    acc = evaluate_accuracy(emb, inst)
    payload = {"path": args.out, "n": emb.n, "d": emb.d, "accuracy": acc}
    _emit(args, payload, f"wrote {emb.n} x {emb.d} coordinates to {args.out} (accuracy {acc:.6f})")
    return 0


def _cmd_arboricity(args) -> int:
    inst = read_instance(args.file)
    report = arboricity(build_constraint_graph(inst))
    dens = report.density_star
    payload = {
        "density_star": f"{dens.numerator}/{dens.denominator}",
        "rho": report.rho,
        "forest_count_upper": report.forest_count_upper,
        "implied_dim_bound": report.implied_dim_bound,
        "witness_subgraph": list(report.witness_subgraph),
    }
    text = (
        f"density_star = {dens.numerator}/{dens.denominator}\n"
        f"rho = {report.rho}\n"
        f"forest_count_upper = {report.forest_count_upper}\n"
        f"implied_dim_bound = {report.implied_dim_bound}\n"
        f"witness = {' '.join(map(str, report.witness_subgraph))}"
    )
    _emit(args, payload, text)
    return 0


def _cmd_train(args) -> int:
    inst = read_instance(args.file)
    config = TrainConfig(
        d=args.d,
        gamma=args.gamma,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        steps=args.steps,
        batch_size=args.batch,
        spherical=args.spherical,
        init_scale=args.init_scale,
        seed=check_seed(args.seed),
        eval_every=args.eval_every,
        patience=args.patience,
    )
    result = train(inst, config)
    write_points(args.out, result.embedding.coords)
    if args.log:
        with open(args.log, "w", encoding="ascii") as fh:
            fh.write("step,loss,accuracy\n")
            for entry in result.log:
                acc = "" if entry.accuracy is None else f"{entry.accuracy:.17g}"
                fh.write(f"{entry.step},{entry.loss:.17g},{acc}\n")
    payload = {
        "coords_path": args.out,
        "log_path": args.log,
        "final_accuracy": result.final_accuracy,
        "final_loss": result.final_loss,
        "steps_run": result.steps_run,
    }
    _emit(
        args,
        payload,
        f"trained d={args.d} for {result.steps_run} steps: accuracy {result.final_accuracy:.6f}",
    )
    return 0


def _cmd_eval(args) -> int:
    inst = read_instance(args.file)
    emb = Embedding(read_points(args.coords))
    sat = satisfied_count(emb, inst)
    acc = sat / inst.m if inst.m else 1.0
    payload = {"accuracy": acc, "satisfied": sat, "total": inst.m}
    _emit(args, payload, f"accuracy {acc:.6f} ({sat}/{inst.m} satisfied)")
    return 0


def _cmd_baseline(args) -> int:
    inst = read_instance(args.file)
    res = trivial_baseline(inst, args.trials, seed=check_seed(args.seed))
    payload = {"mean_accuracy": res.mean, "stderr": res.stderr, "trials": res.trials}
    _emit(args, payload, f"baseline accuracy {res.mean:.6f} +/- {res.stderr:.6f} ({res.trials} trials)")
    return 0


def _cmd_mas(args) -> int:
    if args.mas_command == "reduce":
        g = read_digraph(args.graph)
        inst = reduce_mas_to_triplets(g)
        write_instance(args.out, inst)
        payload = {"path": args.out, "items": inst.n, "triplets": inst.m, "anchor": g.v}
        _emit(args, payload, f"wrote {inst.m} triplets on {inst.n} items (anchor {g.v}) to {args.out}")
        return 0
    if args.mas_command == "solve":
        g = read_digraph(args.graph)
        if g.num_arcs == 0:
            raise LabError("graph has no arcs")
        if args.brute or g.v <= 10:
            sol = brute_force_mas(g)
            payload = {
                "method": "brute",
                "value": sol.value,
                "satisfied": sol.satisfied,
                "arcs": g.num_arcs,
                "permutation": sol.permutation.tolist(),
            }
            _emit(args, payload, f"optimum value {sol.value:.6f} ({sol.satisfied}/{g.num_arcs} arcs)")
            return 0
        mean = random_permutation_baseline(g, args.trials, check_seed(args.seed))
        payload = {"method": "random", "mean_value": mean, "trials": args.trials, "arcs": g.num_arcs}
        _emit(args, payload, f"random-permutation mean value {mean:.6f} over {args.trials} trials")
        return 0
    g = read_digraph(args.graph)
    emb = Embedding(read_points(args.coords))
    sol = extract_permutation(emb, g)
    payload = {
        "value": sol.value,
        "satisfied": sol.satisfied,
        "arcs": g.num_arcs,
        "permutation": sol.permutation.tolist(),
    }
    _emit(args, payload, f"extracted value {sol.value:.6f} ({sol.satisfied}/{g.num_arcs} arcs)")
    return 0


def _cmd_sweep(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise InvalidParameterError("provide exactly one of --config or --preset")
    if args.config:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
    else:
        if args.preset not in experiments.PRESETS:
            raise InvalidParameterError(
                f"unknown preset {args.preset!r}; choices: {sorted(experiments.PRESETS)}"
            )
        data = dict(experiments.PRESETS[args.preset])
    config = experiments.config_from_mapping(data, output_path=args.out)
    if args.workers is not None:
        from dataclasses import replace

        config = replace(config, workers=args.workers)
    records = experiments.run_sweep(config)
    flags = {f"D={k[0]},variant={k[1]}": v for k, v in experiments.trend_report(records).items()}
    payload = {"csv": config.output_path, "rows": len(records), "trend_inversions": flags}
    _emit(args, payload, f"wrote {len(records)} rows to {config.output_path}")
    return 0


def _cmd_verify(args) -> int:
    if args.verify_command == "theorem3":
        report = experiments.verify_theorem3(
            dim=args.D,
            n=args.n,
            epsilon=args.epsilon,
            seeds=args.seeds,
            c1=args.c1,
            c2=args.c2,
            restarts=args.restarts,
            seed=check_seed(args.seed),
            include_fulldim_arm=args.fulldim,
        )
        payload = {
            "D": report.dim,
            "n": report.n,
            "epsilon": report.epsilon,
            "m": report.results[0].m,
            "d_collapse": report.d_collapse,
            "realizable_fraction": report.realizable_fraction,
            "embed_exact_fraction": report.embed_exact_fraction,
            "best_collapse_accuracy": report.best_collapse_accuracy,
            "collapse_cap": report.collapse_cap,
            "mean_rho": float(np.mean([r.rho for r in report.results])),
            "mean_implied_dim_bound": float(
                np.mean([r.implied_dim_bound for r in report.results])
            ),
        }
        text = (
            f"realizable {report.realizable_fraction:.3f}, "
            f"embed-exact {report.embed_exact_fraction:.3f}, "
            f"best accuracy at d={report.d_collapse}: {report.best_collapse_accuracy:.4f} "
            f"(cap 1/2+eps = {report.collapse_cap:.4f})"
        )
        _emit(args, payload, text)
        return 0
    params = {}
    for key in ("n", "m", "alpha", "trials", "threshold", "tol", "draws", "level", "count"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if args.lam is not None:
        params["lam"] = args.lam
    report = experiments.verify_lemmas(args.name, seed=check_seed(args.seed), **params)
    payload = {
        "name": report.name,
        "passed": report.passed,
        "threshold": report.threshold,
        "stats": {k: (v if not isinstance(v, np.generic) else v.item()) for k, v in report.stats.items()},
    }
    _emit(
        args,
        payload,
        f"{report.name}: {'PASS' if report.passed else 'FAIL'} (threshold {report.threshold})",
    )
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Generate, certify, embed, and train ordinal-constraint instances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_json(p):
        p.add_argument("--json", action="store_true", help="emit one JSON object on stdout")

    p = sub.add_parser("gen", help="generate a random or ground-truth instance")
    p.add_argument("--model", required=True, choices=["uniform", "poisson", "sphere", "quad-uniform", "quad-poisson"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--D", type=int, help="ground-truth dimension (sphere model)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    add_json(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("check", help="certify realizability of an instance file")
    p.add_argument("file")
    p.add_argument("--witness", action="store_true", help="print a witness cycle if unrealizable")
    add_json(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("embed", help="construct an exact embedding of a realizable instance")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    add_json(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("arboricity", help="constraint-graph density, arboricity and dimension bound")
    p.add_argument("file")
    add_json(p)
    p.set_defaults(func=_cmd_arboricity)

    p = sub.add_parser("train", help="train an embedding with the hinge loss")
    p.add_argument("file")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--spherical", action="store_true")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--init-scale", type=float)
    p.add_argument("--eval-every", type=int, default=0)
    p.add_argument("--patience", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    add_json(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="accuracy of stored coordinates on an instance")
    p.add_argument("file")
    p.add_argument("--coords", required=True)
    add_json(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="random one-dimensional baseline accuracy")
    p.add_argument("file")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    add_json(p)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("mas", help="maximum-acyclic-subgraph reduction tools")
    msub = p.add_subparsers(dest="mas_command", required=True)
    mp = msub.add_parser("reduce", help="reduce a digraph to an anchored triplet instance")
    mp.add_argument("graph")
    mp.add_argument("--out", required=True)
    add_json(mp)
    mp.set_defaults(func=_cmd_mas)
    mp = msub.add_parser("solve", help="solve a digraph ordering problem")
    mp.add_argument("graph")
    mp.add_argument("--brute", action="store_true", help="force exhaustive search")
    mp.add_argument("--trials", type=int, default=10_000)
    mp.add_argument("--seed", type=int, default=0)
    add_json(mp)
    mp.set_defaults(func=_cmd_mas)
    mp = msub.add_parser("extract", help="extract a vertex ordering from coordinates")
    mp.add_argument("graph")
    mp.add_argument("--coords", required=True)
    add_json(mp)
    mp.set_defaults(func=_cmd_mas)

    p = sub.add_parser("sweep", help="run a dimension sweep from a config file or preset")
    p.add_argument("--config", help="flat key-value TOML config")
    p.add_argument("--preset", help=f"named preset: {sorted(PRESET_NAMES)}")
    p.add_argument("--out", help="output CSV (overrides the config's 'out')")
    p.add_argument("--workers", type=int, help="worker pool width (also LAB_THREADS)")
    add_json(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="run verification pipelines")
    vsub = p.add_subparsers(dest="verify_command", required=True)
    vp = vsub.add_parser("theorem3", help="realizability / arboricity / collapse arms")
    vp.add_argument("--D", type=int, required=True)
    vp.add_argument("--n", type=int, required=True)
    vp.add_argument("--epsilon", type=float, required=True)
    vp.add_argument("--seeds", type=int, default=10)
    vp.add_argument("--c1", type=float, default=1.0 / 240.0)
    vp.add_argument("--c2", type=float, default=1.0)
    vp.add_argument("--restarts", type=int, default=3)
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--fulldim", action="store_true", help="also train at d = D")
    add_json(vp)
    vp.set_defaults(func=_cmd_verify)
    vp = vsub.add_parser("lemma", help="one named Monte Carlo check")
    vp.add_argument("name")
    vp.add_argument("--n", type=int)
    vp.add_argument("--m", type=int)
    vp.add_argument("--lambda", dest="lam", type=float)
    vp.add_argument("--alpha", type=float)
    vp.add_argument("--trials", type=int)
    vp.add_argument("--threshold", type=float)
    vp.add_argument("--tol", type=float)
    vp.add_argument("--draws", type=int)
    vp.add_argument("--level", type=float)
    vp.add_argument("--count", type=int)
    vp.add_argument("--seed", type=int, default=0)
    add_json(vp)
    vp.set_defaults(func=_cmd_verify)

    return parser


PRESET_NAMES = tuple(experiments.PRESETS)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (LabError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"lab: error: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
