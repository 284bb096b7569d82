"""Command line front end.

Five subcommands: classify-weights, transform, analyze, verify-lemma, and
sweep.  Options resolve as flags over config file over defaults.  Outputs
are deterministic: fixed file names inside --out, floats printed with 17
significant digits, randomized runs driven entirely by --seed.

Exit codes: 0 success, 1 a numeric or resource failure stopped the run,
2 invalid configuration or usage (verify-lemma also exits 1 when a
residual lands above tolerance), 3 weight classification came back
inconclusive, 4 analyze produced an inconsistent verdict, 5 analyze ran
on weights outside the regularly varying class (report still written).
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import TauberkitError
from .harness import (
    HarnessConfig,
    Theorem,
    Verdict,
    choose_mu,
    lemma_forward,
    lemma_residual_suite,
    report_json,
    verify_theorem,
)
from .oscillation import export_profiles_csv, export_samples_csv, profile_samples, window_functional_names
from .sequences import (
    DoubleSequence,
    corpus_sequence,
    corpus_weight,
    sequence_names,
    weight_names,
)
from .transform import export_grid_csv, format_float, weighted_mean_field
from .variation import VariationKind, classification_report, classify_adaptive


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand can consume, with conservative bounds."""

    sequence: str = "additive_convergent"
    weights_p: str = "ones"
    weights_q: str = "ones"
    theorem: str = "T41"
    functional: str = "sd_P"
    horizon: int = 512
    lambda_ladder: tuple[float, ...] = (2.0, 1.5, 1.25, 1.1, 1.05)
    kappa_ladder: tuple[float, ...] | None = None
    delta: float = 0.5
    gamma: float = 0.5
    tail_fraction: float = 0.5
    tol: float = 0.05
    eps_dec: float = 0.05
    eps_agree: float | None = None
    class_horizon: int = 10**5
    seed: int = 0
    count: int = 100
    grid: int = 20
    out_dir: str = "."

    def validate(self) -> None:
        if self.horizon < 64:
            raise ValueError(f"horizon must be >= 64, got {self.horizon}")
        if self.class_horizon < 64:
            raise ValueError(f"class-horizon must be >= 64, got {self.class_horizon}")
        for name in ("tol", "eps_dec"):
            v = getattr(self, name)
            if not 0.0 < v < 0.5:
                raise ValueError(f"{name} must lie in (0, 0.5), got {v}")
        if self.eps_agree is not None and not 0.0 < self.eps_agree < 0.5:
            raise ValueError(f"eps-agree must lie in (0, 0.5), got {self.eps_agree}")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ValueError(f"tail-fraction must lie in (0, 1), got {self.tail_fraction}")
        for label, ladder in (("lambda", self.lambda_ladder), ("kappa", self.kappa_ladder)):
            if ladder is None:
                continue
            if not ladder:
                raise ValueError(f"{label} ladder must not be empty")
            if any(l <= 1.0 for l in ladder):
                raise ValueError(f"{label} ladder entries must exceed 1, got {ladder}")
            if any(b >= a for a, b in zip(ladder, ladder[1:])):
                raise ValueError(f"{label} ladder must be strictly decreasing")
        if self.kappa_ladder is not None and len(self.kappa_ladder) != len(self.lambda_ladder):
            raise ValueError("kappa ladder must pair one-for-one with the lambda ladder")
        if self.delta <= 0.0 or self.gamma <= 0.0:
            raise ValueError(f"delta and gamma must be > 0, got ({self.delta}, {self.gamma})")
        if self.theorem not in {t.value for t in Theorem}:
            raise ValueError(f"theorem must be one of T41, T42, T51, T52, got {self.theorem}")
        if self.functional not in window_functional_names():
            raise ValueError(
                f"functional must be one of {', '.join(window_functional_names())}, "
                f"got {self.functional}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.grid < 8:
            raise ValueError(f"grid must be >= 8, got {self.grid}")


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("lambda_ladder", "kappa_ladder"):
        if data.get(key) is not None:
            data[key] = tuple(float(x) for x in data[key])
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **_load_config_file(args.config))
    overrides = {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Sequence expressions
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]+)|(?P<op>[-+*/^(),]))"
)

_FUNCTIONS = {
    "log": np.log,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class _ExprParser:
    """Recursive-descent parser for grid expressions in m and n.

    Grammar: + - * / ^ (right-assoc), unary minus, parentheses, the
    variables m and n, pi and e, one-argument log/exp/sin/cos/sqrt/abs,
    and two-argument pow.  Compiles to a closure over numpy index arrays.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = self._lex(text)
        self.pos = 0

    @staticmethod
    def _lex(text: str):
        tokens = []
        pos = 0
        while pos < len(text):
            mt = _TOKEN.match(text, pos)
            if not mt or mt.end() == pos:
                raise ValueError(f"bad character {text[pos]!r} in expression at {pos}")
            if mt.lastgroup == "num":
                tokens.append(("num", float(mt.group("num"))))
            elif mt.group("id"):
                tokens.append(("id", mt.group("id")))
            else:
                tokens.append(("op", mt.group("op")))
            pos = mt.end()
        tokens.append(("end", None))
        return tokens

    def _peek(self):
        return self.tokens[self.pos]

    def _take(self, kind=None, value=None):
        tok = self.tokens[self.pos]
        if kind and tok[0] != kind or value is not None and tok[1] != value:
            raise ValueError(f"expected {value or kind} at token {self.pos} in {self.text!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self._expr()
        if self._peek()[0] != "end":
            raise ValueError(f"trailing input after expression in {self.text!r}")
        return node

    def _expr(self):
        node = self._term()
        while self._peek() == ("op", "+") or self._peek() == ("op", "-"):
            op = self._take()[1]
            rhs = self._term()
            node = (lambda a, b: lambda M, N: a(M, N) + b(M, N))(node, rhs) if op == "+" else (
                lambda a, b: lambda M, N: a(M, N) - b(M, N)
            )(node, rhs)
        return node

    def _term(self):
        node = self._unary()
        while self._peek() == ("op", "*") or self._peek() == ("op", "/"):
            op = self._take()[1]
            rhs = self._unary()
            node = (lambda a, b: lambda M, N: a(M, N) * b(M, N))(node, rhs) if op == "*" else (
                lambda a, b: lambda M, N: a(M, N) / b(M, N)
            )(node, rhs)
        return node

    def _unary(self):
        if self._peek() == ("op", "-"):
            self._take()
            inner = self._unary()
            return lambda M, N: -inner(M, N)
        return self._power()

    def _power(self):
        base = self._atom()
        if self._peek() == ("op", "^"):
            self._take()
            exponent = self._unary()
            return lambda M, N: np.power(base(M, N), exponent(M, N))
        return base

    def _atom(self):
        kind, value = self._peek()
        if kind == "num":
            self._take()
            return lambda M, N, v=value: np.full(np.broadcast_shapes(M.shape, N.shape), v)
        if kind == "id":
            self._take()
            if value == "m":
                return lambda M, N: np.broadcast_to(M, np.broadcast_shapes(M.shape, N.shape)).astype(np.float64)
            if value == "n":
                return lambda M, N: np.broadcast_to(N, np.broadcast_shapes(M.shape, N.shape)).astype(np.float64)
            if value == "pi":
                return lambda M, N: np.full(np.broadcast_shapes(M.shape, N.shape), math.pi)
            if value == "e":
                return lambda M, N: np.full(np.broadcast_shapes(M.shape, N.shape), math.e)
            if value == "pow":
                self._take("op", "(")
                a = self._expr()
                self._take("op", ",")
                b = self._expr()
                self._take("op", ")")
                return lambda M, N: np.power(a(M, N), b(M, N))
            if value in _FUNCTIONS:
                fn = _FUNCTIONS[value]
                self._take("op", "(")
                inner = self._expr()
                self._take("op", ")")
                return lambda M, N: fn(inner(M, N))
            raise ValueError(f"unknown name {value!r} in expression")
        if (kind, value) == ("op", "("):
            self._take()
            node = self._expr()
            self._take("op", ")")
            return node
        raise ValueError(f"unexpected token {value!r} in {self.text!r}")


def expression_sequence(text: str) -> DoubleSequence:
    """Compile an expression in m and n into a real sequence."""
    rule = _ExprParser(text).parse()
    return DoubleSequence(name=text, rule=rule)


_PARAM_SPEC = re.compile(r"^([A-Za-z_]+)=([-+0-9.eE]+)$")


def _parse_params(spec: str) -> dict[str, float]:
    params = {}
    for part in spec.split(","):
        mt = _PARAM_SPEC.match(part.strip())
        if not mt:
            raise ValueError(f"bad parameter {part!r}; expected key=value")
        params[mt.group(1)] = float(mt.group(2))
    return params


def parse_sequence_spec(spec: str) -> DoubleSequence:
    """A corpus name, optionally with key=value parameters after a colon,
    or a free-form expression in m and n."""
    name, _, rest = spec.partition(":")
    if name in sequence_names():
        return corpus_sequence(name, **(_parse_params(rest) if rest else {}))
    if re.fullmatch(r"[A-Za-z_]+", spec) and spec not in ("m", "n"):
        raise ValueError(
            f"unknown sequence {spec!r}; known: {', '.join(sequence_names())} "
            f"(or an expression in m and n)"
        )
    return expression_sequence(spec)


def parse_weight_spec(spec: str):
    name, _, rest = spec.partition(":")
    if name not in weight_names():
        raise ValueError(f"unknown weight family {name!r}; known: {', '.join(weight_names())}")
    return corpus_weight(name, **(_parse_params(rest) if rest else {}))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_classify_weights(cfg: RunConfig) -> int:
    p = parse_weight_spec(cfg.weights_p)
    vc, used, note = classify_adaptive(p, cfg.class_horizon, cfg.tol)
    payload = classification_report(p.name, vc)
    payload["horizon_requested"] = cfg.class_horizon
    payload["horizon_used"] = used
    payload["note"] = note
    _write_json(_out_dir(cfg) / "variation.json", payload)
    print(f"{p.name}: {vc.kind.value}" + (f" alpha_hat={format_float(vc.alpha_hat)}" if vc.alpha_hat is not None else ""))
    return 3 if vc.kind is VariationKind.INCONCLUSIVE else 0


def cmd_transform(cfg: RunConfig) -> int:
    seq = parse_sequence_spec(cfg.sequence)
    p = parse_weight_spec(cfg.weights_p)
    q = parse_weight_spec(cfg.weights_q)
    fieldv = weighted_mean_field(seq, p, q, cfg.horizon, cfg.horizon)
    out = _out_dir(cfg) / "sigma.csv"
    export_grid_csv(fieldv.sigma, str(out))
    print(f"wrote {out}")
    return 0


def cmd_analyze(cfg: RunConfig) -> int:
    seq = parse_sequence_spec(cfg.sequence)
    p = parse_weight_spec(cfg.weights_p)
    q = parse_weight_spec(cfg.weights_q)
    hc = HarnessConfig(
        horizon=cfg.horizon,
        lambda_ladder=cfg.lambda_ladder,
        kappa_ladder=cfg.kappa_ladder,
        tail_fraction=cfg.tail_fraction,
        eps_dec=cfg.eps_dec,
        eps_agree=cfg.eps_agree,
        class_horizon=cfg.class_horizon,
        class_tol=cfg.tol,
    )
    report = verify_theorem(seq, p, q, Theorem(cfg.theorem), hc)
    out = _out_dir(cfg)
    _write_json(out / "report.json", report_json(report))
    export_profiles_csv(list(report.condition_profiles.values()), str(out / "profiles.csv"))
    print(f"{cfg.theorem} on {seq.name}: {report.verdict.value}")
    if (
        report.weight_class_p.kind is not VariationKind.REGULARLY_VARYING
        or report.weight_class_q.kind is not VariationKind.REGULARLY_VARYING
    ):
        return 5
    return 4 if report.verdict is Verdict.INCONSISTENT else 0


def cmd_verify_lemma(
    cfg: RunConfig,
    m: int | None = None,
    n: int | None = None,
    mu: int | None = None,
    eta: int | None = None,
) -> int:
    """Randomized residual suite by default; --m/--n pin one explicit split."""
    if m is not None or n is not None:
        if m is None or n is None:
            raise ValueError("an explicit split needs both --m and --n")
        seq = parse_sequence_spec(cfg.sequence)
        p = parse_weight_spec(cfg.weights_p)
        q = parse_weight_spec(cfg.weights_q)
        if mu is None:
            mu = choose_mu(p, m, cfg.delta)
        if eta is None:
            eta = choose_mu(q, n, cfg.gamma)
        results = [lemma_forward(seq, p, q, m, n, mu, eta)]
    else:
        results = lemma_residual_suite(cfg.count, cfg.grid, cfg.seed)
    out = _out_dir(cfg) / "lemma_residuals.csv"
    with open(out, "w", newline="") as fh:
        fh.write("m,n,mu,eta,direction,residual\n")
        for dec in results:
            fh.write(
                f"{dec.m},{dec.n},{dec.mu},{dec.eta},{dec.direction},"
                f"{format_float(dec.rel_residual)}\n"
            )
    worst = max(dec.rel_residual for dec in results)
    print(f"wrote {out}")
    print(f"max relative residual {format_float(worst)} over {len(results)} splits")
    return 0 if worst <= 1e-9 else 1


def cmd_sweep(cfg: RunConfig) -> int:
    seq = parse_sequence_spec(cfg.sequence)
    p = parse_weight_spec(cfg.weights_p)
    q = parse_weight_spec(cfg.weights_q)
    ladder = sorted({cfg.horizon // 8, cfg.horizon // 4, cfg.horizon // 2, cfg.horizon})
    samples = profile_samples(
        seq,
        p,
        q,
        cfg.functional,
        ladder,
        list(cfg.lambda_ladder),
        kappa_ladder=list(cfg.kappa_ladder) if cfg.kappa_ladder else None,
        tail_fraction=cfg.tail_fraction,
    )
    out = _out_dir(cfg) / "sweep.csv"
    export_samples_csv(samples, str(out), cfg.functional)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser, horizon_dest: str = "horizon") -> None:
    sp.add_argument("--config", help="JSON file with RunConfig fields")
    sp.add_argument("--seed", type=int, help="seed for randomized commands")
    sp.add_argument("--horizon", dest=horizon_dest, type=int, help="grid extent (>= 64)")
    sp.add_argument("--out", dest="out_dir", help="output directory (default .)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tauberkit",
        description="Weighted means of double sequences and their limit checks",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("classify-weights", help="classify weight growth")
    _add_common(sp, horizon_dest="class_horizon")
    sp.add_argument("--weights", dest="weights_p", help="weight family, e.g. power:beta=1.5")
    sp.add_argument("--tol", type=float, help="classification tolerance")

    sp = sub.add_parser("transform", help="export the weighted mean grid")
    _add_common(sp)
    sp.add_argument("--sequence", help="corpus name or expression in m and n")
    sp.add_argument("--weights-p", dest="weights_p")
    sp.add_argument("--weights-q", dest="weights_q")

    sp = sub.add_parser("analyze", help="full verdict for one theorem")
    _add_common(sp)
    sp.add_argument("--sequence")
    sp.add_argument("--weights-p", dest="weights_p")
    sp.add_argument("--weights-q", dest="weights_q")
    sp.add_argument("--theorem", choices=[t.value for t in Theorem])
    sp.add_argument("--lambdas", dest="lambda_ladder", type=_ladder, help="comma-separated, decreasing, all > 1")
    sp.add_argument("--kappas", dest="kappa_ladder", type=_ladder, help="column ladder (defaults to --lambdas)")
    sp.add_argument("--tail-fraction", dest="tail_fraction", type=float)
    sp.add_argument("--eps-dec", dest="eps_dec", type=float)
    sp.add_argument("--eps-agree", dest="eps_agree", type=float)
    sp.add_argument("--tol", type=float, help="classification tolerance")
    sp.add_argument("--class-horizon", dest="class_horizon", type=int)

    sp = sub.add_parser("verify-lemma", help="decomposition residuals on random grids")
    _add_common(sp)
    sp.add_argument("--count", type=int, help="number of random grids")
    sp.add_argument("--grid", type=int, help="random grid side length")
    sp.add_argument("--sequence", help="sequence for an explicit split")
    sp.add_argument("--weights-p", dest="weights_p")
    sp.add_argument("--weights-q", dest="weights_q")
    sp.add_argument("--m", type=int, help="row anchor for one explicit split")
    sp.add_argument("--n", type=int, help="column anchor for one explicit split")
    sp.add_argument("--mu", type=int, help="row split (default: chooser at --delta)")
    sp.add_argument("--eta", type=int, help="column split (default: chooser at --gamma)")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--gamma", type=float)

    sp = sub.add_parser("sweep", help="per-cell values of one functional across scales")
    _add_common(sp)
    sp.add_argument("--sequence")
    sp.add_argument("--weights-p", dest="weights_p")
    sp.add_argument("--weights-q", dest="weights_q")
    sp.add_argument("--functional", choices=window_functional_names())
    sp.add_argument("--lambdas", dest="lambda_ladder", type=_ladder)
    sp.add_argument("--kappas", dest="kappa_ladder", type=_ladder)
    sp.add_argument("--tail-fraction", dest="tail_fraction", type=float)

    return ap


def _ladder(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}") from None


_COMMANDS = {
    "classify-weights": cmd_classify_weights,
    "transform": cmd_transform,
    "analyze": cmd_analyze,
    "verify-lemma": cmd_verify_lemma,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "verify-lemma":
            return cmd_verify_lemma(cfg, m=args.m, n=args.n, mu=args.mu, eta=args.eta)
        return _COMMANDS[args.command](cfg)
    except (ValueError, KeyError) as exc:
        # Bad names or parameters discovered past config validation.
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TauberkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
