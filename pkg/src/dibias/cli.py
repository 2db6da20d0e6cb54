"""Command line interface: ``dibias <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 numerical or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import DibiasError
from .estimators import KINDS, estimate_pdi, estimate_tdi, estimates_csv
from .exact_info import exact_pdi_rate, exact_tdi_rate, rates_csv, sandwich
from .experiments import ExperimentConfig, emit_report, run_experiment
from .graph import (
    TimeNode,
    build_time_network,
    connecting_path,
    default_horizon,
    markov_certificate,
    theorem1_condition,
)
from .process_model import (
    STRUCTURE_DEFAULTS,
    AlphabetSpec,
    SampleSequence,
    TransitionModel,
    get_structure,
    sample_sequence,
    sample_structured_model,
    stationary_distribution,
)

EXIT_USAGE = 1
EXIT_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, model=True) -> None:
    p.add_argument("--seed", type=int, default=0, help="model seed (and default sequence seed)")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if model:
        p.add_argument("--model", help="model JSON file; otherwise a model is sampled")
        p.add_argument("--structure", type=str.upper, choices=("S1", "S2", "S3", "S4"), default="S1")
        p.add_argument("--alphabet", type=AlphabetSpec.parse, help="sizes X,Y[,Z]")
        p.add_argument("--d", type=int, help="model order")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dibias", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample-model", help="sample a structured model and write it as JSON")
    _common(p)

    p = sub.add_parser("simulate", help="simulate a sequence from a model")
    _common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--sequence-seed", type=int, help="defaults to --seed")

    p = sub.add_parser("exact", help="exact TDI/PDI rates of a model")
    _common(p)
    p.add_argument("--k", type=_int_list, help="orders (default d,d+1,d+2)")
    p.add_argument("--k-max", type=int, help="squeeze order for di_proxy (default d+4)")

    p = sub.add_parser("estimate", help="estimate TDI/PDI rates from a simulated or given sequence")
    _common(p)
    p.add_argument("--sequence", help="sequence CSV written by 'simulate'")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--sequence-seed", type=int)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--kind", choices=KINDS, default="ctw")

    p = sub.add_parser("dsep", help="d-separation query on a model's time network")
    _common(p)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--a", required=True, help="nodes like X_5,Y_4")
    p.add_argument("--b", required=True)
    p.add_argument("--c", default="")
    p.add_argument("--dot", help="also write the network in DOT format")

    p = sub.add_parser("certify", help="conditional Markovicity certificate")
    _common(p)
    p.add_argument("--l", type=int, help="candidate order (default 2d)")
    p.add_argument("--horizon", type=int)

    p = sub.add_parser("experiment", help="run a seeded bias experiment")
    _common(p, model=False)
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--structure", type=str.upper, choices=("S1", "S2", "S3", "S4"))
    p.add_argument("--alphabet", type=AlphabetSpec.parse)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--full-scale", action="store_true", help="100 trials, n = 300000")
    p.set_defaults(seed=None)
    return parser


def _load_model(args) -> tuple[TransitionModel, str]:
    if args.model:
        return TransitionModel.from_json(Path(args.model)), Path(args.model).stem
    alphabet, d = STRUCTURE_DEFAULTS[args.structure]
    alphabet = args.alphabet or alphabet
    d = args.d or d
    model = sample_structured_model(get_structure(args.structure), alphabet, d, args.seed)
    return model, f"{args.structure}-{args.seed}"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _structure_name(model: TransitionModel) -> str:
    return model.template.name if model.template is not None and model.template.name else ""


def _k_values(args, d) -> list[int]:
    return args.k or [d, d + 1, d + 2]


def _parse_nodes(text: str) -> set[TimeNode]:
    nodes = set()
    for tok in filter(None, (t.strip() for t in text.split(","))):
        proc, _, time = tok.partition("_")
        if proc not in ("X", "Y", "Z") or not time.isdigit():
            raise argparse.ArgumentTypeError(f"bad node {tok!r}; expected e.g. X_5")
        nodes.add(TimeNode(proc, int(time)))
    return nodes


def _sequence_text(seq: SampleSequence, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(
            {"seed": seq.seed, "x": seq.x_seq.tolist(), "y": seq.y_seq.tolist(), "z": seq.z_seq.tolist()}
        )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y", "z"])
    w.writerows(zip(range(seq.n), seq.x_seq.tolist(), seq.y_seq.tolist(), seq.z_seq.tolist()))
    return buf.getvalue()


def _read_sequence(path: str) -> SampleSequence:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    return SampleSequence(data[:, 1], data[:, 2], data[:, 3])


def cmd_sample_model(args) -> None:
    model, _ = _load_model(args)
    _emit(model.to_json() + "\n", args.out)


def cmd_simulate(args) -> None:
    model, _ = _load_model(args)
    seed = args.sequence_seed if args.sequence_seed is not None else args.seed
    _emit(_sequence_text(sample_sequence(model, args.n, seed), args.format), args.out)


def cmd_exact(args) -> None:
    model, model_id = _load_model(args)
    st = stationary_distribution(model)
    k_max = args.k_max or model.order + 4
    squeeze = sandwich(model, k_max, k_max, st)
    rows = [
        {
            "model_id": model_id,
            "structure": _structure_name(model),
            "seed": model.seed,
            "k": k,
            "tdi_bits": exact_tdi_rate(model, k, st),
            "pdi_bits": exact_pdi_rate(model, k, st),
            "di_proxy_bits": squeeze.di_proxy,
        }
        for k in _k_values(args, model.order)
    ]
    _emit(json.dumps(rows, indent=2) + "\n" if args.format == "json" else rates_csv(rows), args.out)


def cmd_estimate(args) -> None:
    if args.sequence:
        seq = _read_sequence(args.sequence)
        d = args.d or 1
        model_id, structure, seed = Path(args.sequence).stem, "", ""
    else:
        model, model_id = _load_model(args)
        seed_seq = args.sequence_seed if args.sequence_seed is not None else args.seed
        seq = sample_sequence(model, args.n, seed_seq)
        d, structure, seed = model.order, _structure_name(model), model.seed
    rows = [
        {
            "model_id": model_id,
            "structure": structure,
            "seed": seed,
            "n": seq.n,
            "k": k,
            "kind": args.kind,
            "tdi_hat_bits": estimate_tdi(seq, k, args.kind),
            "pdi_hat_bits": estimate_pdi(seq, k, d, args.kind),
        }
        for k in _k_values(args, d)
    ]
    _emit(json.dumps(rows, indent=2) + "\n" if args.format == "json" else estimates_csv(rows), args.out)


def cmd_dsep(args) -> None:
    model, _ = _load_model(args)
    net = build_time_network(model, args.horizon)
    a, b, c = _parse_nodes(args.a), _parse_nodes(args.b), _parse_nodes(args.c)
    path = connecting_path(net, a, b, c)
    result = {
        "a": sorted(map(str, a)),
        "b": sorted(map(str, b)),
        "c": sorted(map(str, c)),
        "d_separated": path is None,
        "witness_path": None if path is None else [str(n) for n in path],
    }
    if args.dot:
        Path(args.dot).write_text(net.to_dot())
    _emit(json.dumps(result) + "\n", args.out)


def cmd_certify(args) -> None:
    model, _ = _load_model(args)
    d = model.order
    l = args.l or 2 * d
    horizon = args.horizon or default_horizon(d, l)
    net = build_time_network(model, horizon)
    cert = markov_certificate(net, l, horizon)
    out = cert.to_dict()
    out["theorem1_condition"] = theorem1_condition(net)
    _emit(json.dumps(out) + "\n", args.out)


def cmd_experiment(args) -> None:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.alphabet:
        data.update(x_size=args.alphabet.x_size, y_size=args.alphabet.y_size, z_size=args.alphabet.z_size)
    overrides = {
        "structure": args.structure,
        "n": args.n,
        "k_list": args.k,
        "kind": args.kind,
        "trials": args.trials,
        "workers": args.workers,
        "d": args.d,
        "master_seed": args.seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig.from_dict(data, full_scale=args.full_scale)
    report = run_experiment(cfg)
    out = args.out or cfg.output or f"dibias_{cfg.structure.lower()}"
    for path in emit_report(report, out, args.format):
        print(path)


COMMANDS = {
    "sample-model": cmd_sample_model,
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "dsep": cmd_dsep,
    "certify": cmd_certify,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as exc:
        print(f"dibias: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DibiasError, AssertionError) as exc:
        print(f"dibias: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
