"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 domain error (bad data, infeasible budget, ...),
2 usage error. Effective config resolves flags > environment (VTGKIT_*)
> config file > defaults, and every subcommand can print it with
--print-config before doing anything.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import dataset_stats, load_dataset, load_videos, save_dataset
from .difficulty import (
    DifficultyRecord,
    GaussianTarget,
    compute_difficulties,
    estimate_density,
    gaussian_weights,
    sample_subset,
)
from .encoding import EncodingScheme, TimestampFormat, build_artifact, plan_frames, save_artifact
from .lint import LintConfig, lint_rows, load_lint_config, rows_from_file
from .metrics import UnparsedPolicy, evaluate
from .parsing import ParseConfig, parse_batch
from .rlvr import (
    RewardTrace,
    SpanJitterPolicy,
    TraceTooShort,
    detect_plateau,
    save_groups,
    simulate_rollouts,
)

ENV_PREFIX = "VTGKIT_"

SCHEME_ALIASES = {
    "interleaved": EncodingScheme.INTERLEAVED_PREFIX,
    "noninterleaved": EncodingScheme.NONINTERLEAVED_INSTRUCTION,
    "overlay": EncodingScheme.VISUAL_OVERLAY,
    "passthrough": EncodingScheme.POSITION_EMBEDDING_PASSTHROUGH,
}
FORMAT_ALIASES = {"raw": TimestampFormat.RAW_SECONDS, "index": TimestampFormat.FRAME_INDEX}


class _Config:
    """flags > env > config file > defaults."""

    def __init__(self, config_path: str | None):
        self.file_values: dict[str, str] = {}
        if config_path:
            for lineno, line in enumerate(Path(config_path).read_text(encoding="utf-8").splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{config_path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                self.file_values[key.strip()] = value.strip().strip("\"'")
        self.effective: dict = {}

    def get(self, name: str, flag_value, default, cast=str):
        if flag_value is not None:
            value = flag_value
        elif (env := os.environ.get(ENV_PREFIX + name.upper())) is not None:
            value = cast(env)
        elif name in self.file_values:
            value = cast(self.file_values[name])
        else:
            value = default
        self.effective[name] = value
        return value


def _print_config_and_exit(cfg: _Config, args) -> int:
    print(json.dumps(cfg.effective, indent=2, sort_keys=True, default=str))
    return 0


def _load_or_die(path: str, schema: str):
    result = load_dataset(path, schema=schema)
    for rej in result.rejections:
        marker = "rejected" if rej.fatal else "flagged"
        print(f"[{marker}] line {rej.line} ({rej.annotation_id}): {rej.reason}", file=sys.stderr)
    return result


def cmd_stats(args) -> int:
    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    schema = cfg.get("schema", args.schema, "other")
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    result = _load_or_die(data, schema)
    stats = dataset_stats(result.dataset)
    stats["n_rejected"] = sum(1 for r in result.rejections if r.fatal)
    if args.json:
        print(json.dumps(stats, indent=2, sort_keys=True))
    else:
        print(f"dataset:        {stats['name']}")
        print(f"videos:         {stats['n_videos']}")
        print(f"annotations:    {stats['n_annotations']}")
        print(f"avg duration:   {stats['avg_duration']:.1f}s")
        print(f"rejected lines: {stats['n_rejected']}")
        for name, sub in stats["per_source"].items():
            print(f"  {name}: {sub['n_videos']} videos, {sub['n_annotations']} annotations, "
                  f"avg {sub['avg_duration']:.1f}s")
    return 0


def cmd_lint(args) -> int:
    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    lint_cfg_path = cfg.get("lint_config", args.lint_config, None)
    report_path = cfg.get("report", args.report, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    lint_cfg = load_lint_config(lint_cfg_path) if lint_cfg_path else LintConfig()
    report = lint_rows(rows_from_file(data), lint_cfg)
    payload = report.to_json()
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
    if args.json:
        print(payload)
    else:
        errors = report.error_findings()
        print(f"records: {report.n_records}, error findings: {len(errors)}, "
              f"review flags: {len(report.review_findings())}")
        for f in errors:
            print(f"  [{f.rule_id}] {f.annotation_id}: {f.detail}")
    return 0


def cmd_parse(args) -> int:
    cfg = _Config(args.config)
    pred = cfg.get("pred", args.pred, None)
    fps = cfg.get("fps", args.fps, 2.0, float)
    out = cfg.get("out", args.out, None)
    failures = cfg.get("failures", args.failures, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    lines = Path(pred).read_text(encoding="utf-8").splitlines()
    records, summary = parse_batch(lines, ParseConfig(fps_for_frame_indices=fps))
    if out:
        with Path(out).open("w", encoding="utf-8") as f:
            for r in records:
                if r.span is not None:
                    f.write(json.dumps({
                        "annotation_id": r.annotation_id,
                        "raw_text": r.raw_text,
                        "span": [round(r.span.start, 3), round(r.span.end, 3)],
                        "parser_trace": r.parser_trace,
                    }, ensure_ascii=False) + "\n")
    if failures:
        with Path(failures).open("w", encoding="utf-8") as f:
            for r in records:
                if r.span is None:
                    f.write(json.dumps({
                        "annotation_id": r.annotation_id,
                        "raw_text": r.raw_text,
                        "failure_reason": r.failure_reason,
                    }, ensure_ascii=False) + "\n")
    print(f"parsed {summary.n_parsed}/{summary.n_total}; "
          f"failures: {dict(summary.failures_by_reason)}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    pred = cfg.get("pred", args.pred, None)
    schema = cfg.get("schema", args.schema, "other")
    policy = cfg.get("policy", args.policy, "score_zero")
    out = cfg.get("out", args.out, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    result = _load_or_die(data, schema)
    lines = Path(pred).read_text(encoding="utf-8").splitlines()
    records, _summary = parse_batch(lines)
    report = evaluate(result.dataset, records, UnparsedPolicy(policy))
    if out:
        Path(out).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json() if args.json else report.to_text_table())
    return 0


def _read_difficulties(path: str) -> list[DifficultyRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(DifficultyRecord(
                annotation_id=str(obj["annotation_id"]),
                difficulty=float(obj["difficulty"]),
                unparsable=bool(obj.get("unparsable", False)),
            ))
    return records


def cmd_sample(args) -> int:
    cfg = _Config(args.config)
    difficulties = cfg.get("difficulties", args.difficulties, None)
    data = cfg.get("data", args.data, None)
    pred = cfg.get("pred", args.pred, None)
    mu = cfg.get("mu", args.mu, 0.05, float)
    sigma = cfg.get("sigma", args.sigma, 0.2, float)
    n = cfg.get("n", args.n, None, int)
    seed = cfg.get("seed", args.seed, 0, int)
    bins = cfg.get("bins", args.bins, 20, int)
    mode = cfg.get("mode", args.mode, "without")
    out = cfg.get("out", args.out, None)
    hist_path = cfg.get("hist", args.hist, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)

    if difficulties:
        records = _read_difficulties(difficulties)
    elif data and pred:
        result = _load_or_die(data, "other")
        lines = Path(pred).read_text(encoding="utf-8").splitlines()
        preds, _ = parse_batch(lines)
        records = compute_difficulties(result.dataset, preds)
    else:
        raise ValueError("sample needs --difficulties, or --data together with --pred")
    if n is None:
        raise ValueError("sample needs --n")

    density = estimate_density([r.difficulty for r in records], bins=bins)
    weighted = gaussian_weights(records, GaussianTarget(mu, sigma), density)
    sample = sample_subset(weighted, n=n, seed=seed, mode=mode, hist_bins=bins)
    if out:
        with Path(out).open("w", encoding="utf-8") as f:
            for ann_id in sample.selected_ids:
                f.write(json.dumps({"annotation_id": ann_id}) + "\n")
    if hist_path:
        Path(hist_path).write_text(
            json.dumps(sample.difficulty_histogram, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    print(f"selected {len(sample.selected_ids)} items, "
          f"mean difficulty {sample.difficulty_histogram['mean_difficulty']:.3f}", file=sys.stderr)
    return 0


def cmd_monitor(args) -> int:
    cfg = _Config(args.config)
    trace_path = cfg.get("trace", args.trace, None)
    window = cfg.get("window", args.window, 30, int)
    tol = cfg.get("tol", args.tol, 0.02, float)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    trace = RewardTrace.load(trace_path)
    stop = detect_plateau(trace, window=window, rel_tol=tol)
    if args.json:
        print(json.dumps({"stop_step": stop}))
    else:
        print(f"plateau detected at step {stop}" if stop is not None else "no plateau")
    return 0


def cmd_rollout_sim(args) -> int:
    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    group_size = cfg.get("group_size", args.group_size, 8, int)
    steps = cfg.get("steps", args.steps, 100, int)
    seed = cfg.get("seed", args.seed, 0, int)
    improve_until = cfg.get("improve_until", args.improve_until, 60, int)
    trace_out = cfg.get("trace", args.trace, None)
    groups_out = cfg.get("groups_out", args.groups_out, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    result = _load_or_die(data, "other")
    gt = {a.annotation_id: a.span for a in result.dataset.annotations}
    if not gt:
        raise ValueError("no valid annotations to roll out on")
    policy = SpanJitterPolicy(improve_until_step=improve_until)
    trace, groups = simulate_rollouts(gt, policy, group_size=group_size, steps=steps, seed=seed)
    if trace_out:
        trace.save(trace_out)
    if groups_out:
        save_groups(groups, groups_out)
    print(f"simulated {steps} steps x {len(gt)} prompts x {group_size} rollouts", file=sys.stderr)
    return 0


def cmd_encode(args) -> int:
    cfg = _Config(args.config)
    duration = cfg.get("duration", args.duration, None, float)
    fps = cfg.get("fps", args.fps, 2.0, float)
    min_tokens = cfg.get("min_tokens", args.min_tokens, 16, int)
    total_tokens = cfg.get("total_tokens", args.total_tokens, 3584, int)
    scheme = cfg.get("scheme", args.scheme, "interleaved")
    fmt = cfg.get("format", args.format, "raw")
    out = cfg.get("out", args.out, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    if duration is None:
        raise ValueError("encode needs --duration")
    plan = plan_frames(duration, fps=fps, min_tokens=min_tokens, total_tokens=total_tokens)
    artifact = build_artifact(plan, SCHEME_ALIASES[scheme], FORMAT_ALIASES[fmt])
    if out:
        save_artifact(artifact, out)
    if args.json or not out:
        print(artifact.to_json())
    return 0


def cmd_annotate(args) -> int:
    from .reannotate import HttpBackend, MockBackend, run_pipeline, save_candidates

    cfg = _Config(args.config)
    videos_path = cfg.get("videos", args.videos, None)
    backend_name = cfg.get("backend", args.backend, "mock")
    endpoint = cfg.get("backend_endpoint", args.endpoint, None)
    n = cfg.get("n", args.n, None, int)
    bins = cfg.get("bins", args.bins, 8, int)
    seed = cfg.get("seed", args.seed, 0, int)
    out = cfg.get("out", args.out, None)
    accepted_out = cfg.get("accepted", args.accepted, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    videos = load_videos(videos_path)
    if n is None:
        n = len(videos)
    if backend_name == "mock":
        backend = MockBackend(seed=seed)
    elif backend_name == "http":
        if not endpoint:
            raise ValueError("http backend needs --endpoint or VTGKIT_BACKEND_ENDPOINT")
        backend = HttpBackend(endpoint=endpoint)
    else:
        raise ValueError(f"unknown backend {backend_name!r}")
    fragment, candidates, stats = run_pipeline(videos, backend, n=n, bins=bins, seed=seed)
    if out:
        save_candidates(candidates, out)
    if accepted_out:
        save_dataset(fragment, accepted_out)
    print(json.dumps({k: v for k, v in stats.items() if k != "warnings"}, sort_keys=True),
          file=sys.stderr)
    for warning in stats["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _worker_tokens(cfg: _Config, flag_value) -> dict[str, str]:
    raw = cfg.get("worker_tokens", flag_value, None)
    if raw is None:
        raise ValueError("worker tokens required: --workers-file or VTGKIT_WORKER_TOKENS")
    if isinstance(raw, str) and Path(raw).exists():
        raw = Path(raw).read_text(encoding="utf-8")
    tokens = json.loads(raw) if isinstance(raw, str) else raw
    if not isinstance(tokens, dict) or not tokens:
        raise ValueError("worker tokens must be a non-empty token -> worker_id object")
    return tokens


def cmd_audit_serve(args) -> int:
    import uvicorn

    from .audit import AuditStore, create_app

    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    store_dir = cfg.get("store", args.store, None)
    port = cfg.get("port", args.port, 8000, int)
    tokens = _worker_tokens(cfg, args.workers_file)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    result = _load_or_die(data, "other")
    store = AuditStore(result.dataset, root=store_dir)
    app = create_app(store, tokens)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    from .audit import AuditStore

    cfg = _Config(args.config)
    data = cfg.get("data", args.data, None)
    store_dir = cfg.get("store", args.store, None)
    dataset_name = cfg.get("dataset", args.dataset, None)
    out = cfg.get("out", args.out, None)
    ledger_path = cfg.get("ledger", args.ledger, None)
    if args.print_config:
        return _print_config_and_exit(cfg, args)
    result = _load_or_die(data, "other")
    store = AuditStore(result.dataset, root=store_dir)
    records, ledger = store.export_refined(dataset_name or result.dataset.name)
    if out:
        with Path(out).open("w", encoding="utf-8") as f:
            for obj in records:
                f.write(json.dumps(obj, ensure_ascii=False) + "\n")
    if ledger_path:
        Path(ledger_path).write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    print(json.dumps(ledger, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtgkit",
        description="Data-quality and training-recipe toolkit for video temporal grounding.",
    )
    parser.add_argument("--version", action="version", version=f"vtgkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--print-config", action="store_true",
                       help="print the effective config and exit")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("stats", help="dataset counts and duration statistics")
    common(p)
    p.add_argument("--data")
    p.add_argument("--schema", choices=("charades", "activitynet", "qvhighlights", "other"))
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("lint", help="check a dataset against the quality criteria")
    common(p)
    p.add_argument("--data")
    p.add_argument("--lint-config", dest="lint_config")
    p.add_argument("--report")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("parse", help="extract spans from raw model outputs")
    common(p)
    p.add_argument("--pred")
    p.add_argument("--fps", type=float)
    p.add_argument("--out")
    p.add_argument("--failures")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="score predictions (R1@m, mIoU) per benchmark")
    common(p)
    p.add_argument("--data")
    p.add_argument("--pred")
    p.add_argument("--schema", choices=("charades", "activitynet", "qvhighlights", "other"))
    p.add_argument("--policy", choices=("score_zero", "exclude"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", help="difficulty-targeted training-subset sampling")
    common(p)
    p.add_argument("--difficulties")
    p.add_argument("--data")
    p.add_argument("--pred")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--mode", choices=("without", "with"))
    p.add_argument("--out")
    p.add_argument("--hist")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("monitor", help="reward-plateau detection over a trace file")
    common(p)
    p.add_argument("--trace")
    p.add_argument("--window", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("rollout-sim", help="seeded desk-scale rollout simulation")
    common(p)
    p.add_argument("--data")
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--improve-until", dest="improve_until", type=int)
    p.add_argument("--trace")
    p.add_argument("--groups-out", dest="groups_out")
    p.set_defaults(func=cmd_rollout_sim)

    p = sub.add_parser("encode", help="frame schedule and timestamp-encoding plan")
    common(p)
    p.add_argument("--duration", type=float)
    p.add_argument("--fps", type=float)
    p.add_argument("--min-tokens", dest="min_tokens", type=int)
    p.add_argument("--total-tokens", dest="total_tokens", type=int)
    p.add_argument("--scheme", choices=tuple(SCHEME_ALIASES))
    p.add_argument("--format", choices=tuple(FORMAT_ALIASES))
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("annotate", help="automated re-annotation via a backend")
    common(p)
    p.add_argument("--videos")
    p.add_argument("--backend", choices=("mock", "http"))
    p.add_argument("--endpoint")
    p.add_argument("--n", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--accepted")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("audit-serve", help="run the audit HTTP service")
    common(p)
    p.add_argument("--data")
    p.add_argument("--store")
    p.add_argument("--port", type=int)
    p.add_argument("--workers-file", dest="workers_file")
    p.set_defaults(func=cmd_audit_serve)

    p = sub.add_parser("export", help="export the refined dataset from an audit store")
    common(p)
    p.add_argument("--data")
    p.add_argument("--store")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--ledger")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
