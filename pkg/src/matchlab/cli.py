"""Command-line front end.

Subcommands: simulate, sweep, rank, game, bins, verify. Every run echoes
its full effective configuration (flags merged over an optional
``key = value`` config file merged over defaults) to stderr; re-running
with the echoed settings reproduces every CSV byte.

Exit codes: 0 success, 2 parameter error, 3 I/O error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from typing import Callable

from . import bins as bins_mod
from . import engine, experiments, game, models, oracle
from .errors import InternalInvariantError, ParameterError, StructuralError
from .rng import stream


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_bracket(text: str) -> tuple[float, float]:
    parts = text.replace(":", " ").replace(",", " ").split()
    if len(parts) != 2:
        raise ParameterError(f"bracket must be 'lo:hi', got {text!r}")
    return float(parts[0]), float(parts[1])


# Per-command option table: dest -> (parser, default). Config files use the
# same keys; anything else in a config file is an error.
_OPTION_TYPES: dict[str, Callable] = {
    "n": int,
    "alpha": float,
    "d": float,
    "model": str,
    "side": str,
    "trials": int,
    "seed": int,
    "out": str,
    "trace": _parse_bool,
    "workers": int,
    "d_grid": _parse_float_list,
    "bisect": _parse_bracket,
    "pg": float,
    "pb": float,
    "pn": float,
    "streak": int,
    "policy": str,
    "bins": int,
    "throws": int,
    "occupied": int,
    "all_occupied": _parse_bool,
    "matching": str,
}


def _load_config_file(path: str, allowed: set[str]) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in allowed:
                    raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _OPTION_TYPES[key](val.strip())
    except FileNotFoundError as exc:
        raise OSError(f"config file not found: {path}") from exc
    return values


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Flags beat config-file values beat defaults (flags parse to None when absent)."""
    allowed = set(defaults)
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config, allowed))
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _echo_config(command: str, cfg: dict) -> None:
    body = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    print(f"# matchlab {command} {body}", file=sys.stderr)


def _emit(result, out_path: str | None) -> None:
    if out_path:
        experiments.report_csv(result, out_path)
    else:
        experiments.write_csv(result, sys.stdout)


def _side(token: str) -> engine.Side:
    try:
        return engine.Side(token.lower())
    except ValueError as exc:
        raise ParameterError(f"side must be cpda or jpda, got {token!r}") from exc


def _model(token: str) -> models.Model:
    try:
        return models.Model(token.lower())
    except ValueError as exc:
        raise ParameterError(f"unknown model {token!r}") from exc


# --- subcommand implementations ---------------------------------------------


def _cmd_simulate(args) -> int:
    defaults = dict(
        n=100, alpha=0.0, d=10.0, model=None, side="cpda", trials=1, seed=0,
        out=None, trace=False,
    )
    cfg = _merge(args, defaults)
    side = _side(cfg["side"])
    model = _model(cfg["model"]) if cfg["model"] else experiments.model_for_side(side)
    _echo_config("simulate", {**cfg, "model": model.value})
    config = models.MarketConfig(n=cfg["n"], alpha=cfg["alpha"], d=cfg["d"], model=model, seed=cfg["seed"])

    if cfg["trace"] and cfg["trials"] != 1:
        raise ParameterError("--trace requires trials=1")
    if cfg["trace"] and not cfg["out"]:
        raise ParameterError("--trace writes the trace to stdout; route the CSV with --out")

    rows = []
    last_result = None
    for k in range(cfg["trials"]):
        rng = stream(cfg["seed"], 1, k)
        if model == models.Model.SYMMETRIC:
            inst = models.sample_market(config, rng=rng)
            result = engine.run_da(inst, side, record_trace=cfg["trace"])
        else:
            result = engine.run_da_lazy(config, side, rng=rng, record_trace=cfg["trace"])
        last_result = result
        rows.append(
            experiments.SimulateRow(
                n=config.n, alpha=config.alpha, d=config.d, side=side,
                total_proposals=result.total_proposals,
                matched=len(result.matching),
                perfect=len(result.matching) >= config.n,
            )
        )
    _emit(rows, cfg["out"])
    if cfg["trace"]:
        engine.write_trace(last_result.proposal_log, sys.stdout)
        engine.write_chains(engine.extract_rejection_chains(last_result), sys.stdout)
    return 0


def _cmd_sweep(args) -> int:
    defaults = dict(
        n=1000, alpha=0.0, side="cpda", d_grid=None, bisect=None, trials=400,
        seed=0, workers=1, out=None,
    )
    cfg = _merge(args, defaults)
    _echo_config("sweep", cfg)
    side = _side(cfg["side"])
    result = experiments.sweep_threshold(
        n=cfg["n"], alpha=cfg["alpha"], side=side, d_grid=cfg["d_grid"],
        bisect=cfg["bisect"], trials=cfg["trials"], base_seed=cfg["seed"],
        workers=cfg["workers"],
    )
    _emit(result, cfg["out"])
    return 0


def _cmd_rank(args) -> int:
    defaults = dict(n=1000, alpha=0.0, d=20.0, trials=100, seed=0, workers=1, out=None)
    cfg = _merge(args, defaults)
    _echo_config("rank", cfg)
    config = models.MarketConfig(
        n=cfg["n"], alpha=cfg["alpha"], d=cfg["d"],
        model=models.Model.CANDIDATE_LISTS, seed=cfg["seed"],
    )
    profile = experiments.measure_rank_profile(config, cfg["trials"], workers=cfg["workers"])
    _emit(profile, cfg["out"])
    return 0


def _cmd_game(args) -> int:
    defaults = dict(
        pg=0.2, pb=0.5, pn=0.3, streak=2, trials=100000, policy="tight", seed=0, out=None,
    )
    cfg = _merge(args, defaults)
    _echo_config("game", cfg)
    params = game.GameParams(p_good=cfg["pg"], p_bad=cfg["pb"], p_neutral=cfg["pn"], streak=cfg["streak"])
    if not params.is_tight:
        raise ParameterError("game parameters must sum to 1 (the closed form is for the tight game)")
    if cfg["policy"] not in game.POLICIES:
        raise ParameterError(f"unknown policy {cfg['policy']!r}; choose from {sorted(game.POLICIES)}")
    policy = game.POLICIES[cfg["policy"]]()
    sim = game.simulate_game(params, policy, cfg["trials"], seed=cfg["seed"])
    bound = None if params.p_bad == 0 else game.win_prob_upper_bound(params)
    report = experiments.GameReport(
        params=params, policy_name=policy.name,
        closed_form=game.win_prob_closed_form(params), upper_bound=bound, sim=sim,
    )
    _emit(report, cfg["out"])
    return 0


def _cmd_bins(args) -> int:
    defaults = dict(
        bins=100, throws=None, occupied=None, all_occupied=False, trials=1, seed=0, out=None,
    )
    cfg = _merge(args, defaults)
    _echo_config("bins", cfg)
    chosen = [cfg["throws"] is not None, cfg["occupied"] is not None, bool(cfg["all_occupied"])]
    if sum(chosen) != 1:
        raise ParameterError("choose exactly one stop rule: --throws, --occupied, or --all-occupied")
    if cfg["throws"] is not None:
        rule: bins_mod.StopRule = bins_mod.FixedThrows(cfg["throws"])
    elif cfg["occupied"] is not None:
        rule = bins_mod.OccupiedReaches(cfg["occupied"])
    else:
        rule = bins_mod.AllOccupied()
    rows = []
    for k in range(cfg["trials"]):
        occ = bins_mod.run_balls_in_bins(cfg["bins"], rule, rng=stream(cfg["seed"], 2, k))
        rows.append(
            experiments.BinsRow(
                trial=k, n=cfg["bins"], throws=occ.throws, occupied=occ.occupied,
                empty=occ.empty, q_f=bins_mod.acceptance_prob_estimate(occ),
            )
        )
    _emit(experiments.BinsReport(rows=tuple(rows)), cfg["out"])
    return 0


def _cmd_verify(args) -> int:
    defaults = dict(side="cpda", matching=None, trace=False, out=None)
    cfg = _merge(args, defaults)
    _echo_config("verify", {**cfg, "instance": args.instance})
    try:
        with open(args.instance) as fh:
            market = models.load_instance(fh)
    except FileNotFoundError as exc:
        raise OSError(f"instance file not found: {args.instance}") from exc

    if cfg["matching"] and cfg["trace"]:
        raise ParameterError("--matching and --trace are mutually exclusive")

    if cfg["matching"]:
        pairs = []
        try:
            with open(cfg["matching"]) as fh:
                for lineno, raw in enumerate(fh, 1):
                    line = raw.strip()
                    if not line:
                        continue
                    toks = line.split()
                    if len(toks) != 2:
                        raise StructuralError(f"{cfg['matching']}:{lineno}: expected 'candidate job'")
                    pairs.append((int(toks[0]), int(toks[1])))
        except FileNotFoundError as exc:
            raise OSError(f"matching file not found: {cfg['matching']}") from exc
        matching = oracle.Matching(pairs)
    else:
        side = _side(cfg["side"])
        result = engine.run_da(market, side, record_trace=True)
        if cfg["trace"]:
            engine.write_trace(result.proposal_log, sys.stdout)
            engine.write_chains(engine.extract_rejection_chains(result), sys.stdout)
        matching = oracle.Matching.from_da(result.matching)

    blocking = oracle.find_blocking_pairs(market, matching)
    if blocking:
        for bp in blocking:
            print(f"BLOCKING {bp.candidate} {bp.job} {bp.reason.value}")
    else:
        print("STABLE")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchlab",
        description="Random matching-market simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, *names: str) -> None:
        p.add_argument("--config", help="key = value config file; flags override it")
        table = {
            "n": ("--n", dict(type=int, help="jobs on the short side")),
            "alpha": ("--alpha", dict(type=float, help="imbalance: m = round(n*(1+alpha))")),
            "d": ("--d", dict(type=float, help="degree parameter")),
            "model": ("--model", dict(help="symmetric | candidate_lists | job_lists")),
            "side": ("--side", dict(help="cpda | jpda")),
            "trials": ("--trials", dict(type=int)),
            "seed": ("--seed", dict(type=int)),
            "out": ("--out", dict(help="CSV output path (default stdout)")),
            "trace": ("--trace", dict(action="store_true", default=None)),
            "workers": ("--workers", dict(type=int, help="worker processes")),
            "d_grid": ("--d-grid", dict(type=_parse_float_list, help="comma-separated degrees")),
            "bisect": ("--bisect", dict(type=_parse_bracket, help="lo:hi bisection bracket")),
            "pg": ("--pg", dict(type=float)),
            "pb": ("--pb", dict(type=float)),
            "pn": ("--pn", dict(type=float)),
            "streak": ("--streak", dict(type=int)),
            "policy": ("--policy", dict(help="tight | maximal | alternating")),
            "bins": ("--bins", dict(type=int)),
            "throws": ("--throws", dict(type=int)),
            "occupied": ("--occupied", dict(type=int)),
            "all_occupied": ("--all-occupied", dict(action="store_true", default=None)),
            "matching": ("--matching", dict(help="matching file: 'candidate job' per line")),
        }
        for name in names:
            flag, kw = table[name]
            p.add_argument(flag, **kw)

    p = sub.add_parser("simulate", help="run DA trials and print per-trial stats")
    add_common(p, "n", "alpha", "d", "model", "side", "trials", "seed", "out", "trace")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="perfect-matching probability across degrees")
    add_common(p, "n", "alpha", "side", "d_grid", "bisect", "trials", "seed", "workers", "out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("rank", help="mean matched-candidate rank profile under CPDA")
    add_common(p, "n", "alpha", "d", "trials", "seed", "workers", "out")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("game", help="the good/bad/neutral streak game")
    add_common(p, "pg", "pb", "pn", "streak", "trials", "policy", "seed", "out")
    p.set_defaults(func=_cmd_game)

    p = sub.add_parser("bins", help="balls-in-bins occupancy trials")
    add_common(p, "bins", "throws", "occupied", "all_occupied", "trials", "seed", "out")
    p.set_defaults(func=_cmd_bins)

    p = sub.add_parser("verify", help="check an instance + matching for stability")
    p.add_argument("instance", help="instance dump file")
    add_common(p, "matching", "side", "trace")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ParameterError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except InternalInvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
