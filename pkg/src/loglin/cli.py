"""Command-line interface: ``loglin {search,evidence,prior,induced-density}``.

Exit status is 0 on success, 1 for bad flags or input files and 2 for
numerical failures (non-convergence, improper priors).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DomainError, NumericError, ParseError
from .graph import bits, popcount
from .induced import induced_log_density
from .model import InteractionSet, model_from_formula, parse_term, term_name
from .prior import (
    HyperParams,
    check_proper,
    hyperparams_from_fictive_table,
    hyperparams_from_theta,
    prior_moment_odds,
    prior_moment_prob,
)
from .search import MODEL_CLASSES, SearchConfig, canonical_class, log_marginal_likelihood
from .search import posterior_summaries, run_chains
from .table import Table, load_table, uniform_table

__all__ = ["main", "build_parser", "read_theta_file", "parse_vars"]


class UsageError(Exception):
    pass


class ImproperPrior(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _round(x: float) -> float:
    return float(_fmt(x))


def parse_vars(text: str) -> tuple[tuple[str, ...], tuple[int, ...]]:
    """``abc`` (binary) or ``a:2,b:3,c:2`` into names and arities."""
    text = text.strip()
    if not text:
        raise DomainError("empty variable list")
    if "," in text or ":" in text:
        names, levels = [], []
        for part in text.split(","):
            name, _, k = part.strip().partition(":")
            names.append(name)
            try:
                levels.append(int(k) if k else 2)
            except ValueError:
                raise DomainError(f"bad arity in {part!r}") from None
    else:
        names, levels = list(text), [2] * len(text)
    if len(set(names)) != len(names) or any(k < 2 for k in levels):
        raise DomainError(f"bad variable list {text!r}")
    return tuple(names), tuple(levels)


def _parse_levels(text: str, width: int) -> tuple[int, ...]:
    try:
        lv = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise DomainError(f"bad level tuple {text!r}") from None
    if len(lv) != width:
        raise DomainError(f"level tuple {text!r} needs {width} entries")
    return lv


def read_theta_file(path, iset: InteractionSet) -> np.ndarray:
    """Read ``term [levels] value`` lines into a theta vector for ``iset``.

    Terms absent from the model are ignored, so one master file serves every
    model; parameters not listed are zero. ``#`` starts a comment.
    """
    theta = np.zeros(iset.dim)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError("expected 'term [levels] value'", row=lineno)
            try:
                term = parse_term(parts[0], iset.names)
                width = popcount(term)
                lv = _parse_levels(parts[1], width) if len(parts) == 3 else (1,) * width
                value = float(parts[-1])
            except (DomainError, ValueError) as exc:
                raise ParseError(str(exc) if isinstance(exc, DomainError) else
                                 f"non-numeric value {parts[-1]!r}", row=lineno) from None
            if not np.isfinite(value):
                raise ParseError("theta values must be finite", row=lineno)
            if term in iset.term_set:
                key = (term, lv)
                if key not in iset.param_index:
                    raise ParseError(f"level tuple {lv} out of range", row=lineno)
                theta[iset.param_index[key]] = value
    return theta


def _param_label(iset: InteractionSet, mask: int, lv) -> str:
    name = term_name(mask, iset.names)
    if iset.is_binary:
        return name
    return f"{name}@{','.join(map(str, lv))}"


def _data_and_model(args):
    data = load_table(args.data)
    iset = model_from_formula(args.model, data.levels, data.names)
    return data, iset


def _fictive(args, levels, names, alpha) -> Table:
    if getattr(args, "fictive", None):
        fictive = load_table(args.fictive, real=True)
        if tuple(fictive.levels) != tuple(levels) or tuple(fictive.names) != tuple(names):
            raise DomainError("fictive table variables do not match")
        return fictive
    return uniform_table(levels, alpha, names)


def _check_class(iset: InteractionSet, model_class: str) -> None:
    if model_class == "decomposable" and not iset.is_decomposable():
        raise DomainError(f"{iset.formula()} is not a decomposable graphical model")
    if model_class.startswith("graphical") and not iset.is_graphical():
        raise DomainError(f"{iset.formula()} is not a graphical model")


def cmd_search(args) -> int:
    config = SearchConfig(args.model_class, args.alpha, args.iters, args.burnin, args.chains,
                          args.seed, args.threshold, args.estimator)
    data = load_table(args.data)
    fictive = _fictive(args, data.levels, data.names, args.alpha) if args.fictive else None
    report = posterior_summaries(run_chains(config, data, fictive))
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evidence(args) -> int:
    data, iset = _data_and_model(args)
    if args.model_class:
        _check_class(iset, canonical_class(args.model_class))
    method = args.method
    if method == "exact" and not iset.is_decomposable():
        raise DomainError(f"exact evidence needs a decomposable model; {iset.formula()} is not")
    if method == "pm" and not iset.is_graphical():
        raise DomainError(f"prime-component evidence needs a graphical model; "
                          f"{iset.formula()} is not")
    fictive = _fictive(args, data.levels, data.names, args.alpha)
    hp = hyperparams_from_fictive_table(fictive, iset)
    print(_fmt(log_marginal_likelihood(hp, data, method)))
    return 0


def _hyperparams(args) -> HyperParams:
    if args.fictive:
        fictive = load_table(args.fictive, real=True)
        if np.any(fictive.counts <= 0):
            raise ImproperPrior("fictive table cells must be strictly positive")
        iset = model_from_formula(args.model, fictive.levels, fictive.names)
        if args.alpha is not None:
            fictive = fictive.with_counts(fictive.counts * (args.alpha / fictive.total))
        return hyperparams_from_fictive_table(fictive, iset)
    if args.alpha is None:
        raise DomainError("--alpha is required with --theta")
    if not args.vars:
        raise DomainError("--vars is required with --theta")
    names, levels = parse_vars(args.vars)
    iset = model_from_formula(args.model, levels, names)
    return hyperparams_from_theta(read_theta_file(args.theta, iset), iset, args.alpha)


def _parse_moment(text: str, iset: InteractionSet):
    """``E[@levels]:r`` into a term mask, level tuple and power."""
    head, sep, r = text.rpartition(":")
    if not sep:
        raise DomainError(f"moment {text!r} must look like 'E:r'")
    try:
        power = int(r)
    except ValueError:
        raise DomainError(f"bad moment order in {text!r}") from None
    if power < 0:
        raise DomainError("moment order must be nonnegative")
    term_text, _, lv_text = head.partition("@")
    term = parse_term(term_text, iset.names)
    lv = _parse_levels(lv_text, popcount(term)) if lv_text else (1,) * popcount(term)
    return term, lv, power


def cmd_prior(args) -> int:
    try:
        hp = _hyperparams(args)
    except ImproperPrior as exc:
        print(json.dumps({"proper": False, "reason": str(exc)}, indent=2))
        return 2
    iset = hp.iset
    diag = check_proper(hp)
    out = {
        "model": iset.formula(),
        "alpha": _round(hp.alpha),
        "s": {_param_label(iset, m, lv): _round(v) for (m, lv), v in zip(iset.params, hp.s)},
        "proper": diag.proper,
        "residual": float(f"{diag.residual:.6e}"),
    }
    if diag.proper and (args.moment or args.odds_moment):
        moments = {}
        for text in args.moment or []:
            term, lv, r = _parse_moment(text, iset)
            cell = [0] * iset.nvars
            for v, level in zip(bits(term), lv):
                cell[v] = level
            moments[f"p({text.rpartition(':')[0]})^{r}"] = _round(
                prior_moment_prob(hp, cell, r, args.method))
        for text in args.odds_moment or []:
            term, lv, r = _parse_moment(text, iset)
            moments[f"exp({r}*theta({text.rpartition(':')[0]}))"] = _round(
                prior_moment_odds(hp, term, lv, r, args.method))
        out["moments"] = moments
    print(json.dumps(out, indent=2))
    return 0 if diag.proper else 2


def cmd_induced(args) -> int:
    hp = _hyperparams(args)
    probs = load_table(args.probs, real=True)
    if tuple(probs.levels) != hp.iset.levels:
        raise DomainError("probability table variables do not match the model")
    graphical = {"auto": None, "general": False, "graphical": True}[args.form]
    value = induced_log_density(probs.counts, hp, graphical, normalized=not args.unnormalized)
    print(_fmt(value))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loglin", description="Bayesian selection of log-linear models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    classes = list(MODEL_CLASSES) + ["dec"]

    p = sub.add_parser("search", help="MC3 search over a model class")
    p.add_argument("data", help="CSV table of counts")
    p.add_argument("--class", dest="model_class", choices=classes, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--iters", type=int, default=25_000)
    p.add_argument("--burnin", type=int, default=5_000)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--estimator", choices=["renormalized", "visits"], default="renormalized")
    p.add_argument("--fictive", help="CSV fictive table (default: uniform with total alpha)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evidence", help="log marginal likelihood of one model")
    p.add_argument("data")
    p.add_argument("--model", required=True, help="formula such as bc|ace|ade|f")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--class", dest="model_class", choices=classes)
    p.add_argument("--method", choices=["auto", "exact", "pm", "laplace"], default="auto")
    p.add_argument("--fictive")
    p.set_defaults(func=cmd_evidence)

    def prior_args(p):
        p.add_argument("--model", required=True)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--theta", help="file of 'term [levels] value' lines")
        src.add_argument("--fictive", help="CSV fictive table")
        p.add_argument("--alpha", type=float,
                       help="prior total (rescales a fictive table when given)")
        p.add_argument("--vars", help="variables for --theta: 'abc' or 'a:2,b:3'")

    p = sub.add_parser("prior", help="hyperparameters, properness and moments")
    prior_args(p)
    p.add_argument("--moment", action="append", metavar="E:r",
                   help="r-th moment of the cell probability p(i(E))")
    p.add_argument("--odds-moment", action="append", metavar="E:r",
                   help="r-th moment of exp(theta(E))")
    p.add_argument("--method", choices=["auto", "exact", "pm", "laplace"], default="auto")
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("induced-density", help="induced log density of cell probabilities")
    prior_args(p)
    p.add_argument("--probs", required=True, help="CSV table of cell probabilities")
    p.add_argument("--form", choices=["auto", "general", "graphical"], default="auto")
    p.add_argument("--unnormalized", action="store_true")
    p.set_defaults(func=cmd_induced)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "alpha", None) is not None and not args.alpha > 0:
            raise DomainError("alpha must be positive")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"loglin: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DomainError, OSError) as exc:
        print(f"loglin: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
