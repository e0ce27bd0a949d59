"""Command-line entry point: each pipeline stage reads and writes artifacts under ``--run-dir``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_config, load_config
from .demos import fit_mle, generate_demos, read_demos_csv, validate_features, write_demos_csv
from .errors import ConfigError
from .evaluation import evaluate, export_plot_data, write_eval
from .features import check_simplex
from .girl import read_omega, recover_reward, write_girl_result
from .policy import LinearGaussianPolicy
from .trainers.run import FINAL_POLICY, load_policy, train

log = logging.getLogger("apprentice_drive")

DEMOS = "demos.csv"
EXPERT = "expert_policy.json"
GIRL = "girl_result.json"
CURVE = "learning_curve.csv"
METRICS = "eval_metrics.json"
RESOLVED = "resolved_config.txt"

STAGES = ("gen-demos", "fit-expert", "recover-reward", "train", "evaluate", "export-plots")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} is missing; {hint}")
    return path


def parse_omega(text: str) -> np.ndarray:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--omega expects three comma-separated numbers, got {text!r}") from None
    if len(values) != 3:
        raise ConfigError(f"--omega expects three weights, got {len(values)}")
    try:
        return check_simplex(values)
    except ValueError as exc:
        raise ConfigError(f"--omega: {exc}") from None


def resolve_omega(config: RunConfig, run_dir: Path, override: np.ndarray | None) -> np.ndarray:
    """Training reward weights: explicit override, then config, then the recovered weights."""
    if override is not None:
        return override
    if config.train.omega:
        try:
            return check_simplex(config.train.omega)
        except ValueError as exc:
            raise ConfigError(f"train.omega: {exc}") from None
    path = run_dir / GIRL
    if not path.exists():
        raise ConfigError(f"no reward weights: {path} is missing; run recover-reward first or pass --omega")
    return read_omega(path)


def stage_gen_demos(config: RunConfig, run_dir: Path, seed: int) -> None:
    d = config.demos
    demos = generate_demos(d.n_total, d.n_bad, seed, config.vehicle, config.road, config.sim, d, config.features)
    write_demos_csv(demos, run_dir / DEMOS)
    log.info("wrote %d episodes (%d transitions) to %s", len(demos.episodes), demos.n_transitions, run_dir / DEMOS)


def _load_demos(config: RunConfig, run_dir: Path, seed: int):
    path = _require(run_dir / DEMOS, "run gen-demos first")
    return read_demos_csv(path, config.vehicle, config.sim, config.road, seed)


def stage_fit_expert(config: RunConfig, run_dir: Path, seed: int) -> None:
    policy = fit_mle(_load_demos(config, run_dir, seed), config.features)
    report = validate_features(policy, config.vehicle, config.road, config.sim, config.features)
    record = policy.to_dict()
    record["validation"] = {
        "brakes_near_sign": report.brakes_near_sign,
        "terminal": report.terminal.value,
        "final_d_stop_m": report.final_d_stop,
    }
    (run_dir / EXPERT).write_text(json.dumps(record, indent=2) + "\n")
    if not report.good:
        log.warning("fitted expert does not brake near the sign; the policy features may be inadequate")
    log.info("expert sigma=%.4f, deterministic rollout ends %s at d_stop=%.2f m", policy.sigma, report.terminal.value, report.final_d_stop)


def _load_expert(run_dir: Path) -> LinearGaussianPolicy:
    return LinearGaussianPolicy.load(_require(run_dir / EXPERT, "run fit-expert first"))


def stage_recover_reward(config: RunConfig, run_dir: Path, seed: int) -> None:
    demos = _load_demos(config, run_dir, seed)
    solution, G = recover_reward(demos, _load_expert(run_dir), config.girl.gamma, config.features, config.girl.tol, config.girl.max_iter)
    write_girl_result(run_dir / GIRL, solution, G)
    log.info("omega = %s", np.array2string(solution.omega, precision=4))


def stage_train(config: RunConfig, run_dir: Path, seed: int, omega_override=None) -> None:
    omega = resolve_omega(config, run_dir, omega_override)
    expert = _load_expert(run_dir) if config.train.algo == "reinforce" else None
    result = train(config, omega, run_dir, seed, expert)
    log.info("trained %s; final policy at %s", config.train.algo, result.final_path)


def stage_evaluate(config: RunConfig, run_dir: Path, seed: int, omega_override=None, policy_path: Path | None = None) -> dict:
    path = policy_path or _require(run_dir / "checkpoints" / FINAL_POLICY, "run train first or pass --policy")
    try:
        policy = load_policy(path)
    except (KeyError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: unreadable checkpoint ({exc})") from None
    try:
        omega = resolve_omega(config, run_dir, omega_override)
    except ConfigError:
        omega = None
    result = evaluate(policy, config.eval, seed, config.vehicle, config.road.speed_limit, config.sim, config.features, omega)
    extra = {"seed": seed, "policy": str(path), "omega": None if omega is None else [float(x) for x in omega]}
    write_eval(run_dir, result, extra)
    s = result.summary
    log.info("success rate %.3f over %d episodes (%d crossed)", s["success_rate"], s["n_episodes"], s["n_crossed"])
    return s


def stage_export_plots(config: RunConfig, run_dir: Path, seed: int) -> None:
    _require(run_dir / "eval_steps.csv", "run evaluate first")
    for path in export_plot_data(run_dir, config.eval.accel_max):
        log.info("wrote %s", path)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat 'section.key = value' configuration file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--run-dir", type=Path, default=Path("run"))
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")

    parser = argparse.ArgumentParser(prog="apprentice-drive", description="Demonstrations to reward to driving policy.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("gen-demos", parents=[common], help="simulate scripted expert demonstrations")
    sub.add_parser("fit-expert", parents=[common], help="fit the linear-Gaussian expert policy")
    sub.add_parser("recover-reward", parents=[common], help="recover reward weights from demonstrations")
    for name, text in (("train", "train a driving policy"), ("pipeline", "run every stage in order")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--algo", choices=("ddpg", "reinforce"))
        p.add_argument("--omega", help="reward weights 'w_stop,w_speed,w_comfort' instead of the recovered ones")
    p = sub.add_parser("evaluate", parents=[common], help="evaluate the trained policy")
    p.add_argument("--policy", type=Path, help="checkpoint to evaluate (default: checkpoints/final.json)")
    p.add_argument("--omega", help="reward weights used for the reported returns")
    sub.add_parser("export-plots", parents=[common], help="export distance-velocity/acceleration plot data")
    return parser


def run(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    if getattr(args, "algo", None):
        config = config.replace(**{"train.algo": args.algo})
    omega = parse_omega(args.omega) if getattr(args, "omega", None) else None
    run_dir: Path = args.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / RESOLVED).write_text(f"# command = {args.command}\n# seed = {args.seed}\n" + dump_config(config))

    seed = args.seed
    if args.command == "gen-demos":
        stage_gen_demos(config, run_dir, seed)
    elif args.command == "fit-expert":
        stage_fit_expert(config, run_dir, seed)
    elif args.command == "recover-reward":
        stage_recover_reward(config, run_dir, seed)
    elif args.command == "train":
        stage_train(config, run_dir, seed, omega)
    elif args.command == "evaluate":
        stage_evaluate(config, run_dir, seed, omega, args.policy)
    elif args.command == "export-plots":
        stage_export_plots(config, run_dir, seed)
    elif args.command == "pipeline":
        stage_gen_demos(config, run_dir, seed)
        stage_fit_expert(config, run_dir, seed)
        stage_recover_reward(config, run_dir, seed)
        stage_train(config, run_dir, seed, omega)
        stage_evaluate(config, run_dir, seed, omega)
        stage_export_plots(config, run_dir, seed)


def main(argv: list[str] | None = None) -> int:
    """Exit 0 on success, 2 on usage or configuration errors, 1 on runtime failures."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any stage failure maps to exit 1
        log.debug("stage failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
