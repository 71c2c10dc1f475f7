"""Command-line experiment harness.

Verbs::

    efgsolve run      --game kuhn --algorithm domwu --eta 2 -T 10000 --output trace.csv
    efgsolve sweep    --game kuhn --algorithm domwu --etas 0.5,1,2 --outdir sweep/
    efgsolve gap      --game kuhn strategy.txt
    efgsolve describe --game leduc

Settings can also come from ``--config file`` (``key = value`` lines, same
names as the long flags with dashes or underscores); flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import cfr, oomd
from .games import Game, GameError, get_game
from .metrics import GAP_CLAMP, MetricsRecord, ReferenceEquilibrium, duality_gap, rps_reference
from .treeplex import minimize_linear, validate_sequence

logger = logging.getLogger("efgsolve")

OPTIMISTIC = tuple(oomd.ALGORITHMS)
REGRET = tuple(cfr.ALGORITHMS)
CSV_HEADER = "t,gap,l2_to_ref,theta"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    game: str = "kuhn"
    algorithm: str = "domwu"
    eta: Optional[float] = None
    beta: Optional[float] = None
    T: int = 1000
    metric_every: int = 1
    scheme: Optional[str] = None
    averaging: Optional[str] = None
    init: str = "uniform"
    reference: Optional[str] = None
    output: Optional[str] = None
    final: Optional[str] = None
    check_stability: bool = False

    def validate(self) -> None:
        if self.algorithm not in OPTIMISTIC + REGRET:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm in REGRET:
            if self.eta is not None:
                raise ConfigError(f"--eta does not apply to {self.algorithm}")
            if self.beta is not None:
                raise ConfigError(f"--beta does not apply to {self.algorithm}")
            if self.check_stability:
                raise ConfigError(f"--check-stability does not apply to {self.algorithm}")
        elif self.scheme is not None:
            raise ConfigError(f"--scheme applies to regret algorithms only, not {self.algorithm}")
        if self.scheme is not None and self.scheme not in cfr.SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.averaging is not None and self.averaging not in cfr.AVERAGING:
            raise ConfigError(f"unknown averaging {self.averaging!r}")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.metric_every < 1:
            raise ConfigError("metric_every must be at least 1")


_TYPES = {
    "eta": float, "beta": float, "T": int, "metric_every": int,
    "check_stability": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    known = set(ExperimentConfig.__dataclass_fields__) | {"etas", "outdir", "threads"}
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "t":
            key = "T"
        if key not in known:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = _TYPES.get(key, str)(value)
        except ValueError:
            raise ConfigError(f"{path}:{n}: bad value {value!r} for {key}") from None
    return out


def load_strategy(path: str, game: Game) -> np.ndarray:
    """Read a joint strategy: one real per line, ``P`` lines, validated."""
    try:
        z = np.loadtxt(path, dtype=float, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read strategy {path}: {exc}") from None
    if z.shape != (game.P,):
        raise ConfigError(f"strategy {path} has {z.size} entries, game needs P={game.P}")
    report = validate_sequence(game.joint, z)
    if not report:
        raise ConfigError(f"strategy {path} is not a valid sequence-form pair: {report}")
    return z


def save_strategy(path: str, z: np.ndarray) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in z))


def initial_strategy(spec: str, game: Game) -> Optional[np.ndarray]:
    if spec == "uniform":
        return None
    if spec == "first":
        # zero cost: the lowest-index tie-break puts all mass on each first action
        return minimize_linear(game.joint, np.zeros(game.P))[1]
    return load_strategy(spec, game)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.17g}"


def format_csv(records: list[MetricsRecord]) -> str:
    rows = [CSV_HEADER]
    for r in records:
        gap = 0.0 if r.gap < GAP_CLAMP else r.gap
        rows.append(f"{r.t},{_fmt(gap)},{_fmt(r.l2_to_ref)},{_fmt(r.theta)}")
    return "\n".join(rows) + "\n"


def resolve_reference(cfg: ExperimentConfig, game: Game) -> Optional[ReferenceEquilibrium]:
    if cfg.reference is not None:
        return ReferenceEquilibrium(load_strategy(cfg.reference, game), "external")
    if game.name == "rps":
        return rps_reference(game)
    return None


def run_experiment(cfg: ExperimentConfig, game: Optional[Game] = None) -> oomd.Trajectory:
    """Run one configuration and write its CSV (and final strategy) if requested."""
    cfg.validate()
    game = game if game is not None else get_game(cfg.game)
    start = initial_strategy(cfg.init, game)
    reference = resolve_reference(cfg, game)
    if cfg.algorithm in OPTIMISTIC:
        config = oomd.OomdConfig(
            algorithm=cfg.algorithm, eta=cfg.eta, T=cfg.T, metric_every=cfg.metric_every,
            beta=1.0 if cfg.beta is None else cfg.beta, averaging=cfg.averaging or "last",
            start=start, reference=reference, check_stability=cfg.check_stability,
        )
        traj = oomd.run(game, config)
    else:
        config = cfr.CfrConfig(
            algorithm=cfg.algorithm, T=cfg.T, metric_every=cfg.metric_every,
            scheme=cfg.scheme, averaging=cfg.averaging, start=start, reference=reference,
        )
        traj = cfr.run(game, config)
    if cfg.output:
        _write(cfg.output, format_csv(traj.records))
    if cfg.final:
        save_strategy(cfg.final, traj.last)
    return traj


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def sweep(cfg: ExperimentConfig, etas: list[float], outdir: str, threads: int = 1) -> Path:
    """One CSV per step size plus ``index.csv`` mapping eta to file name."""
    if cfg.algorithm not in OPTIMISTIC:
        raise ConfigError("sweep needs an optimistic algorithm")
    if not etas:
        raise ConfigError("sweep needs at least one eta")
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {outdir}: {exc.strerror}") from None
    game = get_game(cfg.game)
    names = [f"eta_{i:03d}.csv" for i in range(len(etas))]
    jobs = []
    for eta, name in zip(etas, names):
        job = ExperimentConfig(**{**cfg.__dict__, "eta": eta, "output": str(out / name), "final": None})
        job.validate()
        jobs.append(job)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        list(pool.map(lambda j: run_experiment(j, game), jobs))
    index = "eta,path\n" + "".join(f"{eta:.17g},{name}\n" for eta, name in zip(etas, names))
    _write(str(out / "index.csv"), index)
    return out / "index.csv"


def describe(game: Game) -> str:
    lines = [
        f"game {game.name}",
        f"M {game.M}  (x sequences incl. empty)",
        f"N {game.N}  (y sequences incl. empty)",
        f"x infosets {game.x.num_simplexes}",
        f"y infosets {game.y.num_simplexes}",
        f"P {game.P}",
        f"nonzeros {game.payoff.nnz}",
        f"scale {game.scale:.17g}",
    ]
    return "\n".join(lines)


# -- argument parsing ----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--game", help="rps, kuhn, leduc or custom:<path> (default kuhn)")
    p.add_argument("--algorithm", choices=OPTIMISTIC + REGRET, help="default domwu")
    p.add_argument("--eta", type=float, help="step size (optimistic algorithms; default 1/(8P))")
    p.add_argument("--beta", type=float, help="dilation weight on every simplex (default 1)")
    p.add_argument("-T", "--T", dest="T", type=int, help="iterations (default 1000)")
    p.add_argument("--metric-every", dest="metric_every", type=int, help="record cadence (default 1)")
    p.add_argument("--scheme", choices=cfr.SCHEMES, help="regret algorithms only")
    p.add_argument("--averaging", choices=cfr.AVERAGING, help="reported point")
    p.add_argument("--init", help="uniform, first, or a strategy file (default uniform)")
    p.add_argument("--reference", help="strategy file with a reference equilibrium")
    p.add_argument("--check-stability", dest="check_stability", action="store_const", const=True,
                   help="assert the DOMWU-style ratio bounds every step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efgsolve", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run one configuration and write a CSV trace")
    _add_common(p)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("--final", help="write the final reported strategy here")

    p = sub.add_parser("sweep", help="run several step sizes")
    _add_common(p)
    p.add_argument("--etas", help="comma-separated step sizes")
    p.add_argument("--outdir", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (default 1)")

    p = sub.add_parser("gap", help="duality gap of a strategy file")
    p.add_argument("--game", default="kuhn")
    p.add_argument("strategy", help="P lines: x then y in sequence form")

    p = sub.add_parser("describe", help="print game dimensions")
    p.add_argument("--game", default="kuhn")
    return parser


def _merge(args: argparse.Namespace) -> tuple[ExperimentConfig, dict]:
    settings = read_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "verb", "verbose"):
            settings[key] = value
    extra = {k: settings.pop(k) for k in ("etas", "outdir", "threads") if k in settings}
    return ExperimentConfig(**settings), extra


def _parse_etas(text) -> list[float]:
    if isinstance(text, list):
        return text
    parts = [s for s in str(text or "").split(",") if s.strip()]
    try:
        return [float(s) for s in parts]
    except ValueError:
        raise ConfigError(f"bad eta list {text!r}") from None


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verb == "describe":
            print(describe(get_game(args.game)))
        elif args.verb == "gap":
            game = get_game(args.game)
            z = load_strategy(args.strategy, game)
            print(f"{duality_gap(game, *game.split(z)):.17g}")
        elif args.verb == "run":
            cfg, _ = _merge(args)
            t0 = time.perf_counter()
            traj = run_experiment(cfg)
            wall = time.perf_counter() - t0
            if not cfg.output:
                sys.stdout.write(format_csv(traj.records))
            last = traj.records[-1]
            print(f"game={cfg.game} algorithm={cfg.algorithm} T={cfg.T} final_gap={(0.0 if last.gap < GAP_CLAMP else last.gap):.6e} wall={wall:.3f}s",
                  file=sys.stdout if cfg.output else sys.stderr)
        else:
            cfg, extra = _merge(args)
            if "outdir" not in extra:
                raise ConfigError("sweep needs --outdir")
            t0 = time.perf_counter()
            index = sweep(cfg, _parse_etas(extra.get("etas")), extra["outdir"], int(extra.get("threads", 1)))
            print(f"wrote {index} wall={time.perf_counter() - t0:.3f}s")
    except (ConfigError, GameError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
