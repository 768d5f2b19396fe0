"""Experiment runner.

Subcommands: ``gen-data``, ``train-annotator``, ``run-al``, ``evaluate``,
``uq-report``. Experiments are described by a JSON config file (sections:
``dataset``, ``split``, ``annotator``, ``al``); a few flags override config
values. Every command validates its full configuration before touching the
filesystem, and all outputs are byte-reproducible for a fixed seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .annotator import Annotator, uq_report, uq_report_to_csv
from .data import (
    BlobSpec,
    Dataset,
    Split,
    SplitSpec,
    class_weights,
    gen_blobs,
    load_features,
    load_network,
    save_features,
    save_network,
    split,
)
from .engine import ALConfig, history_to_csv, run_pool_based, run_qbc
from .errors import ShapeError
from .mc_dropout import threshold_from_fraction
from .metrics import (
    auc_to_csv,
    confusion,
    confusion_to_csv,
    learning_curve_summary,
    report,
    report_to_csv,
    roc_auc_ovr,
)
from .nn import (
    CrossEntropyLoss,
    FocalLoss,
    LayerSpec,
    Network,
    TrainConfig,
    predict_labels,
    predict_proba,
    train,
    with_dropout_rate,
)
from .rng import derive_seed

_SEED_TAGS = {"dataset": 1, "split": 2, "annotator_train": 3, "al": 4, "uq": 5}


def _parse_per_class(text: str):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    return values


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    value = cfg.get(name)
    if value is None:
        if required:
            raise ValueError(f"config: missing section {name!r}")
        return {}
    if not isinstance(value, dict):
        raise ValueError(f"config: section {name!r} must be an object")
    return value


def _build_dataset(cfg: dict, global_seed: int) -> Dataset:
    section = _section(cfg, "dataset")
    kind = section.get("kind")
    if kind == "file":
        path = section.get("path")
        if not path:
            raise ValueError("config: dataset.path is required for kind 'file'")
        return load_features(path)
    if kind == "blobs":
        classes = int(section.get("classes", 2))
        per_class = section.get("per_class", 100)
        if isinstance(per_class, int):
            per_class = [per_class] * classes
        spec = BlobSpec(
            class_count=classes,
            dim=int(section.get("dim", 8)),
            per_class_counts=tuple(int(c) for c in per_class),
            class_center_spread=float(section.get("center_spread", 3.0)),
            within_class_std=float(section.get("within_std", 1.0)),
            seed=int(section.get("seed", derive_seed(global_seed, _SEED_TAGS["dataset"]))),
        )
        return gen_blobs(spec)
    raise ValueError("config: dataset.kind must be 'file' or 'blobs'")


def _build_split_spec(cfg: dict, global_seed: int) -> SplitSpec:
    section = _section(cfg, "split")
    return SplitSpec(
        train_fraction=float(section.get("train", 0.5)),
        val_fraction=float(section.get("val", 0.3)),
        test_fraction=float(section.get("test", 0.2)),
        val_labeled_count=int(section.get("val_labeled", 100)),
        stratified=bool(section.get("stratified", True)),
        seed=int(section.get("seed", derive_seed(global_seed, _SEED_TAGS["split"]))),
    )


def _build_layers(input_dim: int, classes: int, hidden, activation: str,
                  dropout: float, output: str):
    layers = []
    width = input_dim
    for h in hidden:
        layers.append(LayerSpec(width, int(h), activation=activation, dropout_rate=dropout))
        width = int(h)
    if output == "sigmoid":
        if classes != 2:
            raise ValueError("config: a sigmoid output head needs exactly 2 classes")
        layers.append(LayerSpec(width, 1, activation="sigmoid", dropout_rate=0.0))
    elif output == "softmax":
        layers.append(LayerSpec(width, classes, activation="softmax", dropout_rate=0.0))
    else:
        raise ValueError("config: output must be 'softmax' or 'sigmoid'")
    return layers


def _build_train_config(section: dict, default_seed: int, dropout_active: bool) -> TrainConfig:
    return TrainConfig(
        epochs=int(section.get("epochs", 20)),
        batch_size=int(section.get("batch_size", 32)),
        learning_rate=float(section.get("learning_rate", 1e-3)),
        l2=float(section.get("l2", 0.0)),
        dropout_active=bool(section.get("dropout_active", dropout_active)),
        seed=int(section.get("seed", default_seed)),
    )


def _resolve_weights(value, ds: Dataset, train_idx):
    if value is None:
        return None
    if value == "balanced":
        subset = Dataset(X=ds.X[train_idx], y=ds.y[train_idx], class_count=ds.class_count)
        return class_weights(subset)
    return np.asarray([float(v) for v in value])


def _build_loss(section: dict, ds: Dataset, train_idx):
    kind = section.get("kind", "cross_entropy")
    if kind == "cross_entropy":
        return CrossEntropyLoss(class_weights=_resolve_weights(section.get("class_weights"), ds, train_idx))
    if kind == "focal":
        return FocalLoss(alpha=float(section.get("alpha", 4.0)), gamma=float(section.get("gamma", 2.0)))
    raise ValueError("config: loss.kind must be 'cross_entropy' or 'focal'")


@dataclass
class Experiment:
    """Everything a command needs, resolved and validated from one config."""

    seed: int
    out_dir: str
    dataset: Dataset
    split: Split
    annotator_layers: list
    annotator_train: TrainConfig
    annotator_loss: CrossEntropyLoss | FocalLoss
    mc_samples: int
    threshold_fraction: float
    verify_labels: bool
    uq_mc_settings: list
    checkpoint: str
    al_config: ALConfig
    learner_layers: list


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from None


def resolve_experiment(args) -> Experiment:
    cfg = _load_config(args.config)
    seed = int(cfg.get("seed", 0))
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    out_dir = getattr(args, "out_dir", None) or cfg.get("out_dir", "out")

    ds = _build_dataset(cfg, seed)
    split_spec = _build_split_spec(cfg, seed)
    parts = split(ds, split_spec)

    ann = _section(cfg, "annotator")
    dropout = float(ann.get("dropout", 0.1))
    if getattr(args, "dropout", None) is not None:
        dropout = args.dropout
    mc_samples = int(ann.get("mc_samples", 20))
    if getattr(args, "mc_samples", None) is not None:
        if len(args.mc_samples) != 1 and not getattr(args, "mc_list_ok", False):
            raise ValueError("--mc-samples takes a single value for this command")
        mc_samples = args.mc_samples[0]
    default_fraction = 0.5 if ds.class_count == 2 else 0.55
    threshold_fraction = float(ann.get("threshold_fraction", default_fraction))
    if getattr(args, "threshold_fraction", None) is not None:
        threshold_fraction = args.threshold_fraction
    verify = bool(ann.get("verify_labels", False)) or bool(getattr(args, "verify_labels", False))
    uq_settings = [int(v) for v in ann.get("uq_mc_settings", [5, 20, 50])]
    if getattr(args, "mc_samples", None) is not None and getattr(args, "mc_list_ok", False):
        uq_settings = list(args.mc_samples)

    annotator_layers = _build_layers(
        ds.n_features, ds.class_count,
        ann.get("hidden", [64, 32]), ann.get("activation", "relu"),
        dropout, ann.get("output", "softmax"),
    )
    annotator_train = _build_train_config(
        _section(ann, "train", required=False),
        derive_seed(seed, _SEED_TAGS["annotator_train"]),
        dropout_active=True,
    )
    annotator_loss = _build_loss(_section(ann, "loss", required=False), ds, parts.train)

    al = _section(cfg, "al", required=False)
    strategy = al.get("strategy", "entropy")
    if getattr(args, "strategy", None) is not None:
        strategy = args.strategy
    al_weights = _resolve_weights(al.get("class_weights"), ds, parts.train)
    retrain = _build_train_config(
        _section(al, "retrain", required=False), 0, dropout_active=False
    )
    learner_mc = al.get("learner_mc_samples")
    al_config = ALConfig(
        strategy=strategy,
        initial_labeled=int(al.get("initial_labeled", 100)),
        query_batch=int(al.get("query_batch", 10)),
        max_queries=int(al.get("max_queries", 50)),
        committee_size=int(al.get("committee_size", 3)),
        loss_schedule=al.get("loss_schedule", "cross_entropy_only"),
        retrain=retrain,
        class_weights=al_weights,
        focal_alpha=float(al.get("focal_alpha", 4.0)),
        focal_gamma=float(al.get("focal_gamma", 2.0)),
        learner_mc_samples=None if learner_mc is None else int(learner_mc),
        warm_start=bool(al.get("warm_start", True)),
        seed=int(al.get("seed", derive_seed(seed, _SEED_TAGS["al"]))),
    )
    learner_layers = _build_layers(
        ds.n_features, ds.class_count,
        al.get("learner_hidden", [32]), al.get("learner_activation", "relu"),
        float(al.get("learner_dropout", 0.0)), al.get("learner_output", "softmax"),
    )
    return Experiment(
        seed=seed, out_dir=out_dir, dataset=ds, split=parts,
        annotator_layers=annotator_layers, annotator_train=annotator_train,
        annotator_loss=annotator_loss, mc_samples=mc_samples,
        threshold_fraction=threshold_fraction, verify_labels=verify,
        uq_mc_settings=uq_settings, checkpoint=ann.get("checkpoint", "annotator.ckpt"),
        al_config=al_config, learner_layers=learner_layers,
    )


def _checkpoint_path(exp: Experiment) -> str:
    if os.path.isabs(exp.checkpoint):
        return exp.checkpoint
    return os.path.join(exp.out_dir, exp.checkpoint)


def _load_annotator_model(exp: Experiment, dropout_override) -> Network:
    path = _checkpoint_path(exp)
    if not os.path.exists(path):
        raise ValueError(f"annotator checkpoint not found: {path} (run train-annotator first)")
    net = load_network(path)
    if net.input_width != exp.dataset.n_features:
        raise ShapeError(
            f"checkpoint expects {net.input_width} input features but the "
            f"dataset has {exp.dataset.n_features}"
        )
    if dropout_override is not None:
        net = with_dropout_rate(net, dropout_override)
    return net


def _build_annotator(exp: Experiment, model: Network) -> Annotator:
    return Annotator(
        model=model,
        threshold=threshold_from_fraction(exp.dataset.class_count, exp.threshold_fraction),
        mc_samples=exp.mc_samples,
        verify_against_ground_truth=exp.verify_labels,
    )


def _write_evaluation(out_dir: str, probs: np.ndarray, truth: np.ndarray, class_count: int):
    preds = np.argmax(probs, axis=1)
    cm = confusion(preds, truth, class_count)
    confusion_to_csv(cm, os.path.join(out_dir, "confusion.csv"))
    rep = report(cm)
    report_to_csv(rep, os.path.join(out_dir, "report.csv"))
    auc_to_csv(roc_auc_ovr(probs, truth), os.path.join(out_dir, "auc.csv"))
    return rep.accuracy


def cmd_gen_data(args) -> int:
    per_class = args.per_class
    if len(per_class) == 1:
        per_class = per_class * args.classes
    spec = BlobSpec(
        class_count=args.classes,
        dim=args.dim,
        per_class_counts=tuple(per_class),
        class_center_spread=args.center_spread,
        within_class_std=args.within_std,
        seed=args.seed,
    )
    ds = gen_blobs(spec)
    save_features(ds, args.out)
    counts = ",".join(str(int(c)) for c in ds.class_counts)
    print(f"wrote {args.out}: n={ds.n_samples} dim={ds.n_features} "
          f"classes={ds.class_count} per_class={counts}")
    return 0


def cmd_train_annotator(args) -> int:
    exp = resolve_experiment(args)
    ds, parts = exp.dataset, exp.split
    net = Network.init(exp.annotator_layers, seed=exp.seed)
    trained, history = train(
        net, ds.X[parts.train], ds.y[parts.train], exp.annotator_train, exp.annotator_loss
    )
    os.makedirs(exp.out_dir, exist_ok=True)
    save_network(trained, _checkpoint_path(exp))
    with open(os.path.join(exp.out_dir, "train_history.csv"), "w", encoding="ascii") as fh:
        fh.write("epoch,loss,accuracy\n")
        for rec in history:
            fh.write(f"{rec.epoch},{rec.loss!r},{rec.accuracy!r}\n")
    print(f"trained annotator on {len(parts.train)} samples; "
          f"final train accuracy {history[-1].accuracy:.4f}")
    print(f"checkpoint: {_checkpoint_path(exp)}")
    return 0


def cmd_run_al(args) -> int:
    exp = resolve_experiment(args)
    model = _load_annotator_model(exp, getattr(args, "dropout", None))
    annot = _build_annotator(exp, model)
    ds, parts = exp.dataset, exp.split

    if exp.al_config.strategy == "vote_entropy":
        result = run_qbc(ds.X, ds.y, parts, annot, exp.al_config, exp.learner_layers)
        final_probs = np.mean(
            [predict_proba(m, ds.X[parts.test]) for m in result.committee.members], axis=0
        )
        member_curves = result.member_accuracies
    else:
        result = run_pool_based(ds.X, ds.y, parts, annot, exp.al_config, exp.learner_layers)
        final_probs = predict_proba(result.model, ds.X[parts.test])
        member_curves = None

    os.makedirs(exp.out_dir, exist_ok=True)
    history_to_csv(result.state.history, os.path.join(exp.out_dir, "learning_curve.csv"))
    accuracy = _write_evaluation(exp.out_dir, final_probs, ds.y[parts.test], ds.class_count)
    reports = uq_report(
        annot, ds.X[parts.test], ds.y[parts.test], exp.uq_mc_settings,
        rng=np.random.default_rng(derive_seed(exp.seed, _SEED_TAGS["uq"])),
    )
    uq_report_to_csv(reports, os.path.join(exp.out_dir, "uq_report.csv"))
    if member_curves is not None:
        for m in range(len(member_curves[0])):
            path = os.path.join(exp.out_dir, f"member_{m}_history.csv")
            with open(path, "w", encoding="ascii") as fh:
                fh.write("round,test_accuracy\n")
                for r, accs in enumerate(member_curves):
                    fh.write(f"{r},{accs[m]!r}\n")
    alc = learning_curve_summary(result.state.history)
    print(f"strategy={exp.al_config.strategy} rounds={result.state.round_index} "
          f"labeled={result.state.history[-1].labeled_size} "
          f"final_test_accuracy={accuracy:.4f} alc={alc:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    exp = resolve_experiment(args)
    model = _load_annotator_model(exp, getattr(args, "dropout", None))
    ds, parts = exp.dataset, exp.split
    probs = predict_proba(model, ds.X[parts.test])
    os.makedirs(exp.out_dir, exist_ok=True)
    accuracy = _write_evaluation(exp.out_dir, probs, ds.y[parts.test], ds.class_count)
    print(f"test accuracy {accuracy:.4f} on {len(parts.test)} samples")
    return 0


def cmd_uq_report(args) -> int:
    args.mc_list_ok = True
    exp = resolve_experiment(args)
    model = _load_annotator_model(exp, getattr(args, "dropout", None))
    annot = _build_annotator(exp, model)
    ds, parts = exp.dataset, exp.split
    reports = uq_report(
        annot, ds.X[parts.test], ds.y[parts.test], exp.uq_mc_settings,
        rng=np.random.default_rng(derive_seed(exp.seed, _SEED_TAGS["uq"])),
    )
    os.makedirs(exp.out_dir, exist_ok=True)
    uq_report_to_csv(reports, os.path.join(exp.out_dir, "uq_report.csv"))
    for rep in reports:
        print(f"MC-{rep.mc_samples}: correct/confident={rep.correct_lt_t} "
              f"correct/uncertain={rep.correct_ge_t} wrong/confident={rep.wrong_lt_t} "
              f"wrong/uncertain={rep.wrong_ge_t}")
    return 0


def _add_common(sub, *flags):
    sub.add_argument("--config", required=True, help="experiment config (JSON)")
    sub.add_argument("--seed", type=int, default=None, help="override the global seed")
    sub.add_argument("--out-dir", default=None, help="override the output directory")
    if "strategy" in flags:
        sub.add_argument("--strategy", default=None,
                         choices=["least_confident", "margin", "entropy", "vote_entropy", "random"])
    if "mc" in flags:
        sub.add_argument("--mc-samples", type=_parse_per_class, default=None,
                         help="MC forward passes (comma list for uq-report)")
    if "threshold" in flags:
        sub.add_argument("--threshold-fraction", type=float, default=None,
                         help="uncertainty threshold as a fraction of max entropy")
    if "dropout" in flags:
        sub.add_argument("--dropout", type=float, default=None,
                         help="override the annotator's dropout rate")
    if "verify" in flags:
        sub.add_argument("--verify-labels", action="store_true",
                         help="accept only labels that match ground truth")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ualearn",
        description="Uncertainty-gated active-learning experiments.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen-data", help="write a synthetic blob feature CSV")
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--per-class", type=_parse_per_class, required=True,
                     help="samples per class (single int or comma list)")
    gen.add_argument("--center-spread", type=float, default=3.0)
    gen.add_argument("--within-std", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)

    ta = subs.add_parser("train-annotator", help="train and checkpoint the annotator")
    _add_common(ta, "dropout")
    ta.set_defaults(func=cmd_train_annotator)

    ra = subs.add_parser("run-al", help="run an active-learning experiment")
    _add_common(ra, "strategy", "mc", "threshold", "dropout", "verify")
    ra.set_defaults(func=cmd_run_al)

    ev = subs.add_parser("evaluate", help="evaluate a checkpoint on the test split")
    _add_common(ev, "dropout")
    ev.set_defaults(func=cmd_evaluate)

    uq = subs.add_parser("uq-report", help="correctness-vs-uncertainty report")
    _add_common(uq, "mc", "threshold", "dropout")
    uq.set_defaults(func=cmd_uq_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-data":
        if args.classes < 1 or args.dim < 1:
            parser.error("--classes and --dim must be >= 1")
        if any(c < 1 for c in args.per_class):
            parser.error("--per-class values must be >= 1")
        if len(args.per_class) not in (1, args.classes):
            parser.error("--per-class needs one value or one per class")
    try:
        return args.func(args)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
