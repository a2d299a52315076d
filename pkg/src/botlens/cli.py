"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numerical failure. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from botlens import reports
from botlens.classifiers import evaluate, load_model, save_model
from botlens.classifiers.forest import ForestParams
from botlens.classifiers.mlp import MLPConfig
from botlens.dataset import load_csv, stratified_split
from botlens.errors import DataError, NumericalError
from botlens.evaluation import (
    DEFAULT_RULE_FEATURES,
    TrainSettings,
    extract_false_positives,
    feature_deletion_experiment,
    fit,
    mine_fp_features,
    three_class_experiment,
    top_k_features,
)
from botlens.explainers import (
    LimeConfig,
    ShapConfig,
    impurity_importance,
    kernel_shap,
    lime_explain,
    permutation_importance,
    shap_global,
    sp_lime,
)
from botlens.synth import GeneratorConfig, generate, write_dataset

log = logging.getLogger("botlens")

METHODS = ("fi", "pi", "lime", "splime", "shap")
# FI and PI explain the forest, LIME and SHAP the MLP, unless overridden.
DEFAULT_MODEL = {"fi": "forest", "pi": "forest", "lime": "mlp", "splime": "mlp", "shap": "mlp"}
# Arguments that only say where to write things; kept out of embedded configs.
_OUTPUT_ARGS = {"out", "svg", "metrics", "text", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _feature_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated feature list")
    return names


def _training_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("training")
    g.add_argument("--train-frac", type=float, default=0.9)
    g.add_argument("--rebalance", choices=("oversample", "undersample", "none"), default="oversample")
    g.add_argument("--trees", type=int, default=100)
    g.add_argument("--max-depth", type=int, default=None)
    g.add_argument("--min-leaf", type=int, default=2)
    g.add_argument("--epochs", type=int, default=40)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--batch-size", type=int, default=64)
    g.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    return p


def _explainer_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("explainers")
    g.add_argument("--budget", type=int, default=5, help="SP-LIME picks")
    g.add_argument("--candidates", type=int, default=500, help="SP-LIME candidate sample")
    g.add_argument("--samples", type=int, default=5000, help="LIME perturbations")
    g.add_argument("--lime-k", type=int, default=10, help="LIME features per explanation")
    g.add_argument("--repeats", type=int, default=10, help="permutation repeats")
    g.add_argument("--coalitions", type=int, default=2048, help="KernelSHAP coalitions")
    g.add_argument("--background", type=int, default=100, help="KernelSHAP background rows")
    g.add_argument("--shap-sample", type=int, default=200, help="records in the SHAP summary")
    return p


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="botlens", description="Bot detection classifiers and their explanations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common, training, explainers = _common(), _training_flags(), _explainer_flags()

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--bot-frac", type=float, default=0.125)
    p.add_argument("--heavy-frac", type=float, default=0.1)
    p.add_argument("--noise-features", type=int, default=None)
    p.add_argument("--keep-heavy", action="store_true", help="emit heavy users as heavy_user instead of human")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("train", parents=[common, training], help="fit and save a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("forest", "mlp"), default="forest")
    p.add_argument("-o", "--out", required=True, help="model file")
    p.add_argument("--metrics", help="validation metrics report")

    p = sub.add_parser("explain", parents=[common, training, explainers], help="explain a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--model-file", help="explain this saved model instead of training one")
    p.add_argument("--model", choices=("forest", "mlp"), default=None)
    p.add_argument("--instance", help="player_id to explain (lime, shap)")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--svg")

    p = sub.add_parser("ablate", parents=[common, training, explainers], help="feature-deletion experiment")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--features", type=_feature_list, help="delete these instead of an explainer's top-k")
    p.add_argument("--k", type=int, default=2, help="features to delete")
    p.add_argument("--model", choices=("forest", "mlp"), default=None)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--svg")

    p = sub.add_parser("refine", parents=[common, training], help="false-positive mining and three-class run")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("forest", "mlp"), default="forest")
    p.add_argument("--percentile", type=float, default=90.0)
    p.add_argument("--rule-features", type=_feature_list, default=list(DEFAULT_RULE_FEATURES))
    p.add_argument("--mined", action="store_true", help="use the top-3 mined false-positive features as the rule")
    p.add_argument("--max-fps", type=int, default=100, help="false positives explained with LIME")
    p.add_argument("--samples", type=int, default=5000, help="LIME perturbations per false positive")
    p.add_argument("--lime-k", type=int, default=10, help="LIME features per false positive")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--svg")

    p = sub.add_parser("report", help="render a stored JSON report")
    p.add_argument("input")
    p.add_argument("--svg")
    p.add_argument("--text")
    p.add_argument("--drop-top", action="store_true", help="leave the largest bar out of the chart")
    p.add_argument("--top", type=int, default=reports.SVG_TOP)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# -- helpers ---------------------------------------------------------------


def _settings(args, kind: str) -> TrainSettings:
    if not 0 < args.train_frac < 1:
        raise DataError("--train-frac must lie in (0, 1)")
    forest = ForestParams(args.trees, args.max_depth, args.min_leaf)
    mlp = MLPConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs, optimizer=args.optimizer)
    return TrainSettings(kind, args.train_frac, None if args.rebalance == "none" else args.rebalance, forest, mlp)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_ARGS}


def _write(doc: dict, args, started: str) -> None:
    doc = reports.stamp(doc, started)
    reports.write_json(doc, args.out)
    if getattr(args, "svg", None):
        Path(args.svg).write_text(reports.render_svg(doc), encoding="utf-8")
    log.info("wrote %s", args.out)


def _find(ds, player_id: str) -> int:
    try:
        return ds.ids.index(player_id)
    except ValueError:
        raise DataError(f"no record with player_id {player_id!r}") from None


# -- subcommands -----------------------------------------------------------


def cmd_synth(args) -> None:
    cfg = GeneratorConfig(
        n=args.n,
        bot_fraction=args.bot_frac,
        heavy_fraction=args.heavy_frac,
        noise_feature_count=args.noise_features,
        seed=args.seed,
        collapse_heavy=not args.keep_heavy,
    )
    sidecar = write_dataset(generate(cfg), args.out)
    log.info("wrote %s and %s", args.out, sidecar)


def cmd_train(args) -> None:
    started = reports.now()
    ds = load_csv(args.data)
    settings = _settings(args, args.model)
    train, val = stratified_split(ds, settings.train_fraction, args.seed)
    model = fit(train, settings, args.seed)
    metrics = evaluate(model, val)
    config = _config(args)
    save_model(model, args.out, training={"config": config, "seed": args.seed, "metrics": metrics.to_dict()})
    print(f"validation accuracy {metrics.accuracy:.4f}")
    if args.metrics:
        doc = {"experiment": "train", "seed": args.seed, "config": config, "metrics": metrics.to_dict()}
        reports.write_json(reports.stamp(doc, started), args.metrics)


def _global_importance(method: str, model, train, val, args, seed: int):
    """Global ranking for ``method``; the second value carries extra report fields."""
    if method == "fi":
        return impurity_importance(model), {}
    if method == "pi":
        return permutation_importance(model, val, args.repeats, seed), {}
    if method == "splime":
        cfg = LimeConfig(n_samples=args.samples, k=args.lime_k, seed=seed)
        res = sp_lime(model, val, args.budget, cfg, args.candidates, background=train)
        extra = {
            "picks": [a.to_dict() for _, a in res.picks],
            "coverage": res.coverage,
        }
        return res.importance, extra
    if method == "shap":
        rng = np.random.default_rng(seed)
        m = min(len(val), args.shap_sample)
        sample = val.take(np.sort(rng.choice(len(val), size=m, replace=False)))
        cfg = ShapConfig(args.coalitions, args.background, seed)
        return shap_global(model, sample, train, cfg), {"sample_size": m}
    raise DataError(f"{method} has no global ranking; use splime")


def cmd_explain(args) -> None:
    started = reports.now()
    ds = load_csv(args.data)
    kind = args.model or DEFAULT_MODEL[args.method]
    settings = _settings(args, kind)
    train, val = stratified_split(ds, settings.train_fraction, args.seed)
    if args.model_file:
        model = load_model(args.model_file)
        kind = model.kind
    else:
        model = fit(train, settings, args.seed)
    doc = {"experiment": "explain", "method": args.method, "model_kind": kind, "seed": args.seed, "config": _config(args)}
    if args.method in ("lime", "shap") and args.instance:
        rec = ds.record(_find(ds, args.instance))
        if args.method == "lime":
            att = lime_explain(model, rec, train, LimeConfig(n_samples=args.samples, k=args.lime_k, seed=args.seed))
        else:
            att = kernel_shap(model, rec, train, ShapConfig(args.coalitions, args.background, args.seed))
        doc.update(att.to_dict())
        doc["method"] = args.method
    elif args.method == "lime":
        raise UsageError("lime explains one record; pass --instance or use --method splime")
    else:
        imp, extra = _global_importance(args.method, model, train, val, args, args.seed)
        doc.update(imp.to_dict())
        doc.update(extra)
    _write(doc, args, started)
    print(reports.render_text(doc, top=10), end="")


def cmd_ablate(args) -> None:
    started = reports.now()
    ds = load_csv(args.data).collapse_heavy()
    if args.features is None and args.method is None:
        raise UsageError("ablate needs --method or --features")
    if args.method == "lime":
        raise DataError("lime has no global ranking; use splime")
    kind = args.model or DEFAULT_MODEL.get(args.method, "forest")
    settings = _settings(args, kind)
    extra = {}
    if args.features is not None:
        removed = args.features
        tag = "manual"
    else:
        train, val = stratified_split(ds, settings.train_fraction, args.seed)
        model = fit(train, settings, args.seed)
        imp, _ = _global_importance(args.method, model, train, val, args, args.seed)
        if args.method == "splime":
            removed = top_k_features(imp.attributions, args.k)
        else:
            removed = top_k_features(imp, args.k)
        tag = args.method
        extra["importance"] = imp.to_dict()
    report = feature_deletion_experiment(ds, removed, settings, args.seed, tag)
    doc = report.to_dict()
    doc["config"] = {**doc["config"], "cli": _config(args)}
    doc.update(extra)
    _write(doc, args, started)
    print(reports.render_text(doc), end="")


def cmd_refine(args) -> None:
    started = reports.now()
    ds = load_csv(args.data)
    settings = _settings(args, args.model)
    binary = ds.collapse_heavy()
    train, val = stratified_split(binary, settings.train_fraction, args.seed)
    model = fit(train, settings, args.seed)
    fps = extract_false_positives(model, val)
    mining = None
    if len(fps):
        if len(fps) > args.max_fps:
            fps = fps.take(range(args.max_fps))
        mining = mine_fp_features(model, fps, train, LimeConfig(n_samples=args.samples, k=args.lime_k, seed=args.seed))
    features = args.rule_features
    if args.mined:
        if mining is None:
            raise DataError("no false positives to mine a rule from")
        features = mining.top(3)
    report = three_class_experiment(ds, None, settings, args.seed, features, args.percentile)
    doc = report.to_dict()
    doc["config"] = {**doc["config"], "cli": _config(args)}
    doc["fp_mining"] = {
        "explained": 0 if mining is None else len(mining.attributions),
        "ranking": [] if mining is None else [
            {"feature": f.feature, "count": f.count, "mean_abs_weight": f.mean_abs_weight} for f in mining.ranking
        ],
    }
    _write(doc, args, started)
    print(reports.render_text(doc), end="")


def cmd_report(args) -> None:
    doc = reports.read_json(args.input)
    if args.svg:
        Path(args.svg).write_text(reports.render_svg(doc, drop_top=args.drop_top), encoding="utf-8")
    text = reports.render_text(doc, top=args.top)
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
    else:
        print(text, end="")


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "explain": cmd_explain,
    "ablate": cmd_ablate,
    "refine": cmd_refine,
    "report": cmd_report,
}


def run(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"botlens {args.command}: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
