from __future__ import annotations

import argparse
import contextlib
import json
import sys
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from stemsim.config import RunConfig, load_run_config
from stemsim.config.types import RUN_NAMESPACE
from stemsim.corpus import (
    ROLES,
    SEPARATED_ROLES,
    CorpusManifest,
    CorpusSpec,
    compute_sdr,
    load_manifest,
    load_track,
    source_role,
    synth_corpus,
)
from stemsim.errors import USAGE_CODES, ErrorCode, StemSimError
from stemsim.evaluation import (
    DistanceMatrix,
    average_matrices,
    build_listening_sets,
    correlation_table,
    cross_role_tables,
    embed_corpus,
    evaluate_role,
    export_snippets,
    index_distance_matrix,
    query_similar,
    read_matrix_csv,
    write_correlation_csv,
    write_embeddings_bin,
    write_embeddings_csv,
    write_listening_sets,
    write_matrix_csv,
    write_pgm,
)
from stemsim.features import load_role_features
from stemsim.gateway import CommandContext, CommandGateway, CommandResult
from stemsim.observability import configure_logging
from stemsim.trainer import load_run, save_run, train
from stemsim.trainer.run_io import write_json

from storage.db.engine import db_session

MATRIX_NAME = "distance_matrix.csv"
HEATMAP_NAME = "distance_matrix.pgm"
REPORT_NAME = "report.json"


# --- shared plumbing ----------------------------------------------------------


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "manifest": getattr(args, "manifest", None),
        "output_dir": getattr(args, "runs", None),
        "seed": getattr(args, "seed", None),
        "training.epochs": getattr(args, "epochs", None),
        "training.n_trials": getattr(args, "trials", None),
        "features.cache_dir": getattr(args, "cache_dir", None),
        "evaluation.k": getattr(args, "k", None),
    }


def _config(args: argparse.Namespace, ctx: CommandContext) -> RunConfig:
    cfg = load_run_config(getattr(args, "config", None), _overrides(args))
    ctx.bind_run(cfg.run_id())
    return cfg


def _manifest(cfg: RunConfig) -> CorpusManifest:
    if cfg.manifest is None:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "No corpus manifest given (use --manifest or the config's 'manifest')",
            {"path": ["manifest"]},
        )
    manifest = load_manifest(cfg.manifest)
    if manifest.sample_rate != cfg.sample_rate:
        raise StemSimError(
            ErrorCode.SAMPLE_RATE_MISMATCH,
            "Corpus sample rate differs from the configured one",
            {"manifest": manifest.sample_rate, "config": cfg.sample_rate},
        )
    return manifest


def _roles(requested: Optional[str], available: Sequence[str]) -> List[str]:
    """'all' (or nothing) selects every available role; otherwise a comma list."""
    if not requested or requested == "all":
        roles = list(available)
    else:
        roles = [r.strip() for r in requested.split(",") if r.strip()]
        unknown = [r for r in roles if r not in ROLES]
        if unknown:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                f"Unknown role(s): {', '.join(unknown)}",
                {"path": ["roles"], "allowed": list(ROLES)},
            )
        missing = [r for r in roles if r not in available]
        if missing:
            raise StemSimError(ErrorCode.NOT_FOUND, f"Role(s) not available: {', '.join(missing)}", {"roles": missing})
    if not roles:
        raise StemSimError(ErrorCode.EMPTY_RESULT, "No roles to process")
    return roles


def _role_dirs(root: Path) -> List[str]:
    root = Path(root)
    return [r for r in ROLES if (root / r).is_dir()]


def _run_id_for(payload: Dict[str, Any]) -> str:
    return str(uuid.uuid5(RUN_NAMESPACE, json.dumps(payload, sort_keys=True, default=str)))


def _print_result(res: CommandResult) -> None:
    if res.status == "ok":
        print(json.dumps(res.data, indent=2, sort_keys=True))
    else:
        err = res.error or {}
        print(f"error: {err.get('code')}: {err.get('message')}", file=sys.stderr)
        if err.get("details"):
            print(json.dumps(err["details"], sort_keys=True), file=sys.stderr)


def exit_code(res: CommandResult) -> int:
    if res.status == "ok":
        return 0
    return 2 if (res.error or {}).get("code") in USAGE_CODES else 1


def dispatch(
    args: argparse.Namespace,
    command: str,
    body: Callable[[Dict[str, Any], CommandContext], Dict[str, Any]],
    run_id: str = "",
) -> int:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    gw = CommandGateway()
    audit = contextlib.nullcontext(None) if args.no_audit else db_session()
    with audit as db:
        res = gw.run(db, command, body, payload, run_id=run_id)
    _print_result(res)
    return exit_code(res)


# --- commands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    def body(payload, ctx):
        spec = CorpusSpec(
            n_train_tracks=args.train,
            n_test_tracks=args.test,
            duration_s=args.duration,
            sample_rate=args.sample_rate,
            separated=args.separated,
        )
        manifest = synth_corpus(spec, args.seed, Path(args.out))
        return {
            "out": str(manifest.root),
            "tracks": len(manifest.tracks),
            "files": sum(len(t.stems) for t in manifest.tracks),
            "seed": args.seed,
        }

    spec_id = {k: getattr(args, k) for k in ("train", "test", "duration", "sample_rate", "separated", "seed")}
    return dispatch(args, "synth", body, run_id=_run_id_for(spec_id))


def cmd_featurize(args) -> int:
    def body(payload, ctx):
        cfg = _config(args, ctx)
        if cfg.cache_dir is None:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                "featurize needs a feature cache directory",
                {"path": ["features", "cache_dir"]},
            )
        manifest = _manifest(cfg)
        counts: Dict[str, Dict[str, int]] = {}
        for role in _roles(args.role, [r for r in cfg.roles if r in manifest.roles()]):
            counts[role] = {}
            for split in ("train", "test"):
                feats = load_role_features(
                    manifest, split, role, cfg.segmentation.for_split(split), cfg.features, cfg.cache_dir
                )
                counts[role][split] = len(feats)
        return {"cache_dir": str(cfg.cache_dir), "segments": counts}

    return dispatch(args, "featurize", body)


def cmd_train(args) -> int:
    def body(payload, ctx):
        cfg = _config(args, ctx)
        manifest = _manifest(cfg)
        arch = cfg.encoder_arch()
        out: Dict[str, Any] = {}
        for role in _roles(args.role, [r for r in cfg.roles if r in manifest.roles()]):
            models = train(
                manifest,
                role,
                cfg.features,
                cfg.segmentation.for_split("train"),
                arch,
                cfg.training,
                cache_dir=cfg.cache_dir,
                snapshot={**cfg.to_json(), "run_id": cfg.run_id(), "role": role},
            )
            run_dir = save_run(cfg.output_dir / role, models)
            for m in models:
                ctx.record_metric(role, m.trial, "final_loss", m.loss_history[-1])
            out[role] = {
                "run_dir": str(run_dir),
                "trials": len(models),
                "final_loss": [m.loss_history[-1] for m in models],
            }
        return {"run_id": cfg.run_id(), "roles": out}

    return dispatch(args, "train", body)


def _write_matrix(out_dir: Path, matrix: DistanceMatrix) -> None:
    write_matrix_csv(out_dir / MATRIX_NAME, matrix)
    write_pgm(out_dir / HEATMAP_NAME, matrix)


def cmd_eval(args) -> int:
    def body(payload, ctx):
        cfg = _config(args, ctx)
        manifest = _manifest(cfg)
        runs = cfg.output_dir
        out_dir = Path(args.out) if args.out else runs / "eval"
        roles = _roles(args.roles, [r for r in cfg.roles if r in _role_dirs(runs)])

        report: Dict[str, Any] = {"run_id": cfg.run_id(), "seed": cfg.seed, "k": cfg.evaluation.k, "roles": {}}
        averaged: List[DistanceMatrix] = []
        for role in roles:
            feats = load_role_features(
                manifest, "test", role, cfg.segmentation.for_split("test"), cfg.features, cfg.cache_dir
            )
            result = evaluate_role(load_run(runs / role), feats, cfg.evaluation.k)
            for index, acc in zip(result.indices, result.accuracies):
                ctx.record_metric(role, index.trial, "knn_accuracy", acc)
                trial_dir = out_dir / role / f"trial_{index.trial}"
                write_embeddings_csv(trial_dir / "embeddings.csv", index)
                write_embeddings_bin(trial_dir / "embeddings.bin", index)
            _write_matrix(out_dir / role, result.averaged)
            report["roles"][role] = result.to_json()
            averaged.append(result.averaged)

        tables = cross_role_tables(averaged)
        for method, table in tables.items():
            write_correlation_csv(out_dir / f"correlation_{method}.csv", table)
        report["correlation"] = tables
        write_json(out_dir / REPORT_NAME, report)
        return {"out": str(out_dir), **report}

    return dispatch(args, "eval", body)


def cmd_distmat(args) -> int:
    def body(payload, ctx):
        cfg = _config(args, ctx)
        manifest = _manifest(cfg)
        role = _roles(args.role, _role_dirs(cfg.output_dir))[0]
        feats = load_role_features(
            manifest, "test", role, cfg.segmentation.for_split("test"), cfg.features, cfg.cache_dir
        )
        matrices = [index_distance_matrix(embed_corpus(m, feats)) for m in load_run(cfg.output_dir / role)]
        matrix = average_matrices(matrices)
        out_dir = Path(args.out) if args.out else cfg.output_dir / "eval" / role
        _write_matrix(out_dir, matrix)
        return {"role": role, "out": str(out_dir), "tracks": matrix.track_ids, "trials": matrix.trials}

    return dispatch(args, "distmat", body)


def _eval_matrices(eval_dir: Path, roles: Sequence[str]) -> List[DistanceMatrix]:
    return [read_matrix_csv(Path(eval_dir) / r / MATRIX_NAME, role=r) for r in roles]


def cmd_correlate(args) -> int:
    def body(payload, ctx):
        eval_dir = Path(args.eval_dir)
        roles = _roles(args.roles, [r for r in _role_dirs(eval_dir) if (eval_dir / r / MATRIX_NAME).exists()])
        matrices = _eval_matrices(eval_dir, roles)
        methods = ["pearson", "spearman"] if args.method == "both" else [args.method]
        tables = {m: correlation_table(matrices, m) for m in methods}
        for method, table in tables.items():
            write_correlation_csv(eval_dir / f"correlation_{method}.csv", table)
        return tables

    return dispatch(args, "correlate", body, run_id=_run_id_for({"eval_dir": args.eval_dir}))


def cmd_query(args) -> int:
    def body(payload, ctx):
        matrix = _eval_matrices(Path(args.eval_dir), [args.role])[0]
        ranked = query_similar(matrix, args.track, args.top)
        return {
            "role": args.role,
            "track": args.track,
            "neighbors": [{"track_id": t, "distance": d} for t, d in ranked],
        }

    return dispatch(args, "query", body, run_id=_run_id_for({"eval_dir": args.eval_dir}))


def cmd_listening_sets(args) -> int:
    def body(payload, ctx):
        cfg = _config(args, ctx)
        manifest = _manifest(cfg)
        eval_dir = Path(args.eval_dir) if args.eval_dir else cfg.output_dir / "eval"
        out_dir = Path(args.out) if args.out else eval_dir / "listening"
        available = [r for r in _role_dirs(eval_dir) if (eval_dir / r / MATRIX_NAME).exists()]
        matrices = {r: m for r, m in zip(available, _eval_matrices(eval_dir, available))}
        n_sets = args.n if args.n is not None else cfg.evaluation.n_sets
        ev = cfg.evaluation

        written: Dict[str, int] = {}
        for role in _roles(args.role, [r for r in available if r in cfg.roles]):
            if role == "mix":
                contrast = [(r, m) for r, m in matrices.items() if r != "mix" and r not in SEPARATED_ROLES]
                if not contrast:
                    raise StemSimError(
                        ErrorCode.NOT_FOUND,
                        "Listening sets for the mix need at least one instrument distance matrix",
                        {"eval_dir": str(eval_dir)},
                    )
            else:
                if "mix" not in matrices:
                    raise StemSimError(
                        ErrorCode.NOT_FOUND,
                        "Listening sets for an instrument need the mix distance matrix",
                        {"eval_dir": str(eval_dir)},
                    )
                contrast = matrices["mix"]
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, ROLES.index(role)]))
            sets = build_listening_sets(matrices[role], contrast, rng, n_sets, role, ev.max_retries)
            sets = export_snippets(
                sets,
                manifest,
                out_dir / role,
                snippet_seconds=ev.snippet_seconds,
                snippet_offset=ev.snippet_offset,
                silence_threshold=cfg.segmentation.silence_threshold,
            )
            write_listening_sets(out_dir / role / "listening_sets.json", sets)
            written[role] = len(sets)
        return {"out": str(out_dir), "sets": written, "total": sum(written.values())}

    return dispatch(args, "listening-sets", body)


def _sdr_report(manifest: CorpusManifest) -> Dict[str, Any]:
    """Mean SDR of each separated stem (and of the mix) against the original stem."""
    report: Dict[str, Any] = {}
    for role in SEPARATED_ROLES:
        original = source_role(role)
        for split in ("train", "test"):
            separated, before = [], []
            for entry in manifest.split(split):
                if role not in entry.stems or original not in entry.stems:
                    continue
                sr = manifest.sample_rate
                ref = load_track(entry.stems[original], sr, entry.track_id, original).samples
                separated.append(compute_sdr(ref, load_track(entry.stems[role], sr, entry.track_id, role).samples))
                if "mix" in entry.stems:
                    before.append(compute_sdr(ref, load_track(entry.stems["mix"], sr, entry.track_id, "mix").samples))
            if separated:
                report.setdefault(role, {})[split] = {
                    "tracks": len(separated),
                    "mean_sdr_separated": float(np.mean(separated)),
                    "mean_sdr_mix": float(np.mean(before)) if before else None,
                }
    if not report:
        raise StemSimError(ErrorCode.EMPTY_RESULT, "Corpus has no separated stems to score")
    return report


def cmd_sdr(args) -> int:
    def body(payload, ctx):
        if args.reference and args.estimate:
            ref = load_track(Path(args.reference), args.sample_rate)
            est = load_track(Path(args.estimate), args.sample_rate)
            return {"sdr_db": compute_sdr(ref.samples, est.samples)}
        if args.manifest:
            return {"roles": _sdr_report(load_manifest(Path(args.manifest)))}
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "Give either --reference and --estimate, or --manifest",
            {"path": ["sdr"]},
        )

    return dispatch(args, "sdr", body, run_id=_run_id_for({k: getattr(args, k) for k in ("reference", "estimate", "manifest")}))


# --- parser -------------------------------------------------------------------


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="Run config (YAML or JSON).")
    p.add_argument("--manifest", help="Corpus manifest file or directory (overrides the config).")
    p.add_argument("--runs", help="Run directory root (overrides the config's output_dir).")
    p.add_argument("--seed", type=int)
    p.add_argument("--cache-dir", dest="cache_dir")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stemsim")
    p.add_argument("--log-level", default="INFO")
    p.add_argument("--no-audit", action="store_true", help="Skip the SQL audit store.")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("synth", help="Render a deterministic synthetic multi-stem corpus.")
    sp.add_argument("--train", type=int, default=20)
    sp.add_argument("--test", type=int, default=8)
    sp.add_argument("--duration", type=float, default=70.0)
    sp.add_argument("--sample-rate", dest="sample_rate", type=int, default=44100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--separated", action="store_true", help="Also write simulated separated stems.")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    fp = sub.add_parser("featurize", help="Warm the feature cache for train and test splits.")
    _config_args(fp)
    fp.add_argument("--role", default="all")
    fp.set_defaults(func=cmd_featurize)

    tp = sub.add_parser("train", help="Train per-role encoders (one run directory per role).")
    _config_args(tp)
    tp.add_argument("--role", default="all", help="Role, comma list, or 'all'.")
    tp.add_argument("--epochs", type=int)
    tp.add_argument("--trials", type=int)
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="kNN accuracy, distance matrices and correlation report.")
    _config_args(ep)
    ep.add_argument("--roles", default="all")
    ep.add_argument("--k", type=int)
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_eval)

    dp = sub.add_parser("distmat", help="Trial-averaged centroid distance matrix for one role.")
    _config_args(dp)
    dp.add_argument("--role", required=True)
    dp.add_argument("--out")
    dp.set_defaults(func=cmd_distmat)

    cp = sub.add_parser("correlate", help="Cross-role Pearson/Spearman tables from an eval directory.")
    cp.add_argument("--eval-dir", dest="eval_dir", required=True)
    cp.add_argument("--roles", default="all")
    cp.add_argument("--method", choices=["pearson", "spearman", "both"], default="both")
    cp.set_defaults(func=cmd_correlate)

    qp = sub.add_parser("query", help="Most similar tracks under one role's metric.")
    qp.add_argument("--eval-dir", dest="eval_dir", required=True)
    qp.add_argument("--role", required=True)
    qp.add_argument("--track", required=True)
    qp.add_argument("--top", type=int, default=5)
    qp.set_defaults(func=cmd_query)

    lp = sub.add_parser("listening-sets", help="Build listening sets and export snippet WAVs.")
    _config_args(lp)
    lp.add_argument("--eval-dir", dest="eval_dir")
    lp.add_argument("--role", default="all")
    lp.add_argument("--n", type=int)
    lp.add_argument("--out")
    lp.set_defaults(func=cmd_listening_sets)

    sd = sub.add_parser("sdr", help="Scale-invariant SDR for one pair or a whole corpus.")
    sd.add_argument("--reference")
    sd.add_argument("--estimate")
    sd.add_argument("--manifest")
    sd.add_argument("--sample-rate", dest="sample_rate", type=int, default=44100)
    sd.set_defaults(func=cmd_sdr)

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
