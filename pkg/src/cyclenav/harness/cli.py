"""Command line entry point.

Subcommands: gen, train, eval-ct, ablate, recall, sweep, fidelity,
probe-neurons, record, replay, serve, plot. Global flags: --config FILE,
--seed N, --out DIR, --threads N, plus repeatable --set section.key=value
overrides. Every run writes the fully resolved config and a CSV metrics log
into the output directory. Exit codes: 0 success, 2 configuration error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cyclenav",
        description="goal-cycle social-learning rig: simulate, train, evaluate",
    )
    p.add_argument("--config", help="experiment config file (INI-style)")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="override run.out output directory")
    p.add_argument("--threads", type=int, help="override run.threads")
    p.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override any config value (repeatable)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("gen", help="emit the resolved task for the config")

    q = sub.add_parser("train", help="train a policy")
    q.add_argument("--ablation", help="ablation name, e.g. MEDAL or M----")

    q = sub.add_parser("eval-ct", help="cultural-transmission eval of a policy")
    _policy_flags(q)
    q.add_argument("--episodes", type=int, default=8, help="tasks to average over")

    q = sub.add_parser("ablate", help="train several ablations")
    q.add_argument("--names", default="MEDAL,M----",
                   help="comma-separated ablation names")
    q.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")

    q = sub.add_parser("recall", help="contiguous-trial recall analysis")
    _policy_flags(q)
    q.add_argument("--trials", type=int, default=2)

    q = sub.add_parser("sweep", help="generalisation sweep along one axis")
    _policy_flags(q)
    q.add_argument("--axis", required=True)
    q.add_argument("--grid", required=True, help="comma-separated values")

    q = sub.add_parser("fidelity", help="two-option preference measurement")
    _policy_flags(q)
    q.add_argument("--tasks", type=int, default=10)
    q.add_argument("--episodes-per-direction", type=int, default=1)

    q = sub.add_parser("probe-neurons", help="social/goal neuron probing")
    _policy_flags(q, checkpoint_required=True)
    q.add_argument("--episodes", type=int, default=200)

    q = sub.add_parser("record", help="record an episode to a trajectory file")
    _policy_flags(q, allow_none=True)
    q.add_argument("--file", default="episode.traj")

    q = sub.add_parser("replay", help="replay a trajectory as the expert")
    _policy_flags(q, allow_none=True)
    q.add_argument("--file", required=True)

    q = sub.add_parser("serve", help="serve a live human-play session")
    _policy_flags(q, allow_none=True)
    q.add_argument("--port", type=int, default=8765)
    q.add_argument("--file", default="live.traj")
    q.add_argument("--tick-rate", type=float, default=15.0)

    q = sub.add_parser("plot", help="render SVG plots from run outputs")
    q.add_argument("--metrics", help="metrics.csv from a training run")
    q.add_argument("--scenario", choices=["correct", "wrong-halfway",
                                          "dropout-halfway", "wrong-then-dropout",
                                          "absent"],
                   help="also render a stub trajectory-comparison scenario")
    return p


def _policy_flags(q, checkpoint_required=False, allow_none=False):
    q.add_argument("--checkpoint", required=checkpoint_required,
                   help="trained checkpoint (.npz)")
    q.add_argument(
        "--stub",
        choices=["follower", "replay", "random", "mirror", "anti", "random-entry"],
        help="use a scripted stub instead of a checkpoint",
    )


def _policy_factory(args):
    from ..stubs import (
        AntiFidelityPolicy,
        FollowerPolicy,
        MirrorFidelityPolicy,
        RandomEntryPolicy,
        RandomPolicy,
        ReplayPolicy,
    )

    if getattr(args, "checkpoint", None):
        from ..training import NetPolicy, load_checkpoint

        params, net, meta = load_checkpoint(args.checkpoint)
        repeat = meta.get("train_config", {}).get("action_repeat", 1)
        return lambda: NetPolicy(params, net, greedy=True, action_repeat=repeat)
    stubs = {
        "follower": FollowerPolicy,
        "replay": ReplayPolicy,
        "random": RandomPolicy,
        "mirror": MirrorFidelityPolicy,
        "anti": AntiFidelityPolicy,
        "random-entry": RandomEntryPolicy,
    }
    name = getattr(args, "stub", None)
    if name is None:
        return None
    return stubs[name]


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0])
    for r in rows[1:]:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def _prepare(args):
    from .config import load_config

    overrides = {}
    for item in args.set:
        key, _, value = item.partition("=")
        if not value:
            raise SystemExit(f"--set needs SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out is not None:
        overrides["run.out"] = args.out
    if args.threads is not None:
        overrides["run.threads"] = str(args.threads)
    config = load_config(args.config, overrides)
    out = Path(str(config["run"]["out"]))
    out.mkdir(parents=True, exist_ok=True)
    from .config import resolved_text

    (out / "resolved_config.ini").write_text(resolved_text(config))
    return config, out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config, out = _prepare(args)
    except Exception as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _dispatch(args, config, out)
    except BrokenPipeError:
        return EXIT_OK
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args, config, out: Path) -> int:
    from ..tasks import build_task

    cmd = args.command
    log_rows: list[dict] = []

    if cmd == "gen":
        task = config.task_spec()
        built = build_task(task)
        info = {
            "world_size": task.world.world_size,
            "n_goals": task.world.n_goals,
            "world_seed": task.world.seed,
            "task_seed": task.seed,
            "order": "-".join(map(str, built.game.order.perm)),
            "crossings": built.game.crossings,
            "goals": [
                {"x": round(float(g.centre[0]), 4), "y": round(float(g.centre[1]), 4),
                 "colour": g.colour} for g in built.world.goals
            ],
        }
        (out / "task.json").write_text(json.dumps(info, indent=2) + "\n")
        print(json.dumps(info, indent=2))
        log_rows.append({"command": "gen", "crossings": built.game.crossings})

    elif cmd == "train":
        from ..training import train

        setup = config.train_setup(args.ablation)
        result = train(
            setup,
            config.train_config(),
            checkpoint_path=str(out / "checkpoint.npz"),
            progress=True,
        )
        _write_csv(out / "metrics.csv", result.metrics)
        log_rows = result.metrics
        best = max((r.get("train_ct", 0) or 0) for r in result.metrics) if result.metrics else 0
        print(f"trained {result.env_steps} steps; best train ct {best:.3f}; "
              f"checkpoint {out / 'checkpoint.npz'}")

    elif cmd == "eval-ct":
        from ..ct import run_ct_eval

        factory = _policy_factory(args)
        if factory is None:
            raise SystemExit("eval-ct needs --checkpoint or --stub")
        base = config.task_spec()
        rng = np.random.default_rng(config["run"]["seed"])
        from ..tasks import TRAINING_SEED_BOUND

        for i in range(args.episodes):
            task = replace(
                base,
                seed=int(rng.integers(TRAINING_SEED_BOUND)),
                world=replace(base.world, seed=int(rng.integers(TRAINING_SEED_BOUND))),
            )
            m = run_ct_eval(factory, task)
            log_rows.append(
                {"task": i, "E": m.expert_score, "A_full": m.agent_full,
                 "A_solo": m.agent_solo, "A_half": m.agent_half, "ct": round(m.ct, 4)}
            )
        mean_ct = float(np.mean([r["ct"] for r in log_rows]))
        print(f"mean ct over {args.episodes} tasks: {mean_ct:.3f}")
        log_rows.append({"task": "mean", "ct": round(mean_ct, 4)})

    elif cmd == "ablate":
        from ..training import train

        for name in args.names.split(","):
            for seed in (int(s) for s in args.seeds.split(",")):
                setup = replace(config.train_setup(name.strip()), seed=seed)
                result = train(setup, config.train_config())
                best = max((r.get("train_ct", 0) or 0) for r in result.metrics) if result.metrics else 0.0
                final_score = result.metrics[-1]["mean_score"] if result.metrics else 0.0
                row = {"ablation": name.strip(), "seed": seed,
                       "best_train_ct": round(best, 4),
                       "final_score": round(final_score, 3),
                       "env_steps": result.env_steps}
                log_rows.append(row)
                print(row)

    elif cmd == "recall":
        from ..analysis import recall_trials

        factory = _policy_factory(args)
        if factory is None:
            raise SystemExit("recall needs --checkpoint or --stub")
        report = recall_trials(factory(), config.task_spec(), n_trials=args.trials)
        for i, (score, entries) in enumerate(
            zip(report.trial_scores, report.entries_per_trial)
        ):
            log_rows.append({"trial": i + 1, "score": score, "entries": entries})
        print("trial scores:", report.trial_scores)

    elif cmd == "sweep":
        from ..adr import reference_config
        from ..analysis import generalisation_sweep

        factory = _policy_factory(args)
        if factory is None:
            raise SystemExit("sweep needs --checkpoint or --stub")
        grid = [float(v) for v in args.grid.split(",")]
        ranges = {
            p.name: (p.hard_min, p.hard_max) for p in reference_config().params
        }
        ranges["expert_noise"] = (0.0, 0.5)
        cells = generalisation_sweep(
            factory, axis=args.axis, grid=grid,
            base_task=config.task_spec(), final_ranges=ranges,
        )
        for c in cells:
            log_rows.append(
                {"axis": c.axis, "value": c.value,
                 "normalised_score": c.normalised_score, "ood": c.ood,
                 "episodes": c.n_episodes}
            )
            print(f"{c.axis}={c.value:g}: normalised score "
                  f"{c.normalised_score if c.normalised_score is not None else 'n/a'}"
                  f"{' (ood)' if c.ood else ''}")
        from .plotting import plot_sweep

        plot_sweep(cells, str(out / f"sweep_{args.axis}.svg"))

    elif cmd == "fidelity":
        from ..analysis import two_option_preference
        from ..tasks import TRAINING_SEED_BOUND, TaskSpec

        factory = _policy_factory(args)
        if factory is None:
            raise SystemExit("fidelity needs --checkpoint or --stub")
        base = config.task_spec()
        rng = np.random.default_rng(config["run"]["seed"])
        tasks = [
            replace(base, seed=int(rng.integers(TRAINING_SEED_BOUND)))
            for _ in range(args.tasks)
        ]
        pref = two_option_preference(
            factory, tasks, episodes_per_direction=args.episodes_per_direction
        )
        if pref is None:
            print("no completed cycles; preference undefined")
            log_rows.append({"preference": "undefined"})
        else:
            print(f"preference for demonstrated direction: {100 * pref:.1f}%")
            log_rows.append({"preference": round(pref, 4)})

    elif cmd == "probe-neurons":
        from ..analysis import (
            collect_belief_dataset,
            goal_neuron_rank,
            probe_social_neurons,
        )
        from ..tasks import TRAINING_SEED_BOUND, TaskSpec
        from ..training import load_checkpoint

        params, net, _meta = load_checkpoint(args.checkpoint)
        base = config.task_spec()

        def sampler(rng):
            return replace(base, seed=int(rng.integers(TRAINING_SEED_BOUND)))

        beliefs, labels, inside = collect_belief_dataset(
            params, net, sampler, n_episodes=args.episodes,
            seed=config["run"]["seed"],
        )
        res = probe_social_neurons(beliefs, labels, seed=config["run"]["seed"])
        rank = goal_neuron_rank(beliefs, inside, top_k=10)
        print(f"social neurons {res.social_neurons} "
              f"(mass {res.selected_mass:.2f}); test acc {res.test_accuracy:.3f}; "
              f"interventions: social {res.accuracy_social_randomised:.3f}, "
              f"complement {res.accuracy_complement_randomised:.3f}, "
              f"all {res.accuracy_all_randomised:.3f}")
        print("top goal neurons:", rank.ranked[:5])
        log_rows.append(
            {"social_neurons": json.dumps(res.social_neurons),
             "selected_mass": round(res.selected_mass, 4),
             "test_accuracy": round(res.test_accuracy, 4),
             "acc_social_randomised": round(res.accuracy_social_randomised, 4),
             "acc_complement_randomised": round(res.accuracy_complement_randomised, 4),
             "acc_all_randomised": round(res.accuracy_all_randomised, 4),
             "top_goal_neurons": json.dumps(rank.ranked[:10])}
        )

    elif cmd == "record":
        from .trajectory import record_episode

        factory = _policy_factory(args)
        traj = record_episode(
            out / args.file, config.task_spec(),
            agent_policy=factory() if factory else None,
        )
        print(f"recorded {len(traj.steps)} steps to {out / args.file}; "
              f"scores {traj.final_scores}")
        log_rows.append({"file": args.file, **{f"score_{k}": v for k, v in traj.final_scores.items()}})

    elif cmd == "replay":
        from ..episodes import Episode
        from .trajectory import load_trajectory, replay_expert

        traj = load_trajectory(args.file)
        task = config.task_spec()
        if task.world.seed != traj.task.world.seed:
            task = traj.task  # default: replay on the recorded task itself
        rep = replay_expert(traj, task)
        factory = _policy_factory(args)
        ep = Episode(task, agent_policy=factory() if factory else None,
                     expert_override=rep)
        result = ep.run()
        same = result.scores["expert"] == traj.final_scores["expert"]
        print(f"replayed {len(result.steps)} steps; expert score "
              f"{result.scores['expert']} (recorded {traj.final_scores['expert']}, "
              f"match={same}); scores {result.scores}")
        log_rows.append({"replay_match": same, **{f"score_{k}": v for k, v in result.scores.items()}})

    elif cmd == "serve":
        from .live import serve_live

        factory = _policy_factory(args)
        summary = serve_live(
            config.task_spec(), args.port,
            agent_policy=factory() if factory else None,
            out_path=str(out / args.file), tick_rate=args.tick_rate,
        )
        print(f"session over: {summary}")
        log_rows.append({k: json.dumps(v) if isinstance(v, dict) else v
                         for k, v in summary.items()})

    elif cmd == "plot":
        from .plotting import load_metrics_csv, plot_metrics, plot_trajectory_comparison

        if args.metrics:
            rows = load_metrics_csv(args.metrics)
            plot_metrics(rows, str(out / "metrics.svg"))
            print(f"wrote {out / 'metrics.svg'}")
            log_rows.append({"plotted": args.metrics})
        if args.scenario:
            from ..analysis import trajectory_compare
            from ..stubs import ReplayPolicy

            comp = trajectory_compare(config.task_spec(), ReplayPolicy(), args.scenario)
            plot_trajectory_comparison(comp, str(out / f"trajectory_{args.scenario}.svg"))
            print(f"wrote {out / f'trajectory_{args.scenario}.svg'}")
            log_rows.append({"scenario": args.scenario})
        if not args.metrics and not args.scenario:
            raise SystemExit("plot needs --metrics and/or --scenario")

    _write_csv(out / f"{cmd.replace('-', '_')}_log.csv", log_rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
