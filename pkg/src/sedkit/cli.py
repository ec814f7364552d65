"""Command-line interface.

    sedkit synth --config c.json --out dir/
    sedkit featurize --in dataset_dir --out features_dir
    sedkit train --experiment exp4a --seed 1 [--config c.json]
    sedkit predict --weights w.bin --features dir --out dir [--reweight]
    sedkit evaluate --ref dir --est dir --mode segment|event
    sedkit experiment --id exp3 --seeds 3 [--config c.json]

Artifacts live under $SEDKIT_DATA_DIR (default ./sedkit_data) unless a
command writes to an explicit --out path.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments, fileio
from .experiments import (
    EXPERIMENT_IDS,
    ExperimentConfig,
    config_digest,
    data_root,
    featurize_dir,
    model_setup,
    prepare_run_data,
    run_experiment,
    run_table,
    sweep,
    threshold_sweep,
)
from .labels import FRAME_HOP
from .metrics import evaluate_corpus, format_report
from .model import LayerSpec, NetworkConfig, TrainConfig, load_weights
from .postproc import binarize, decode_events, reweight
from .synth import DatasetConfig


def load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def experiment_config(config_dict: dict, experiment_id: str) -> ExperimentConfig:
    """Build a full experiment configuration from a (possibly partial) dict."""
    ds = DatasetConfig.from_dict(config_dict.get("dataset", {}))
    net_d = dict(config_dict.get("network", {}))
    trunk = net_d.get("trunk")
    base_net = NetworkConfig(n_classes=len(ds.classes))
    net = NetworkConfig(
        n_classes=len(ds.classes),
        input_dim=net_d.get("input_dim", base_net.input_dim),
        trunk=tuple(LayerSpec(**s) for s in trunk) if trunk else base_net.trunk,
        n_shared=net_d.get("n_shared", base_net.n_shared),
        sad_hidden=net_d.get("sad_hidden", base_net.sad_hidden),
        dropout_p=net_d.get("dropout_p", base_net.dropout_p),
    )
    tr_d = dict(config_dict.get("training", {}))
    desk = experiments.DESK_TRAIN
    training = TrainConfig(
        lr=tr_d.get("lr", desk.lr),
        max_epochs=tr_d.get("max_epochs", desk.max_epochs),
        batch_size=tr_d.get("batch_size", desk.batch_size),
        early_stop_patience=tr_d.get("early_stop_patience", desk.early_stop_patience),
    )
    cfg = ExperimentConfig(
        experiment_id=experiment_id,
        dataset=ds,
        network=net,
        training=training,
        sed_threshold=config_dict.get("sed_threshold", experiments.SED_THRESHOLD),
        sad_threshold=config_dict.get("sad_threshold", experiments.SAD_THRESHOLD),
    )
    cfg.validate()
    return cfg


def cmd_synth(args):
    cfg = DatasetConfig.from_dict(load_config(args.config).get("dataset", load_config(args.config)))
    out = Path(args.out)
    for split in cfg.splits:
        experiments.synthesize_split(cfg, split, out / split)
    (out / "dataset_config.json").write_text(
        json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    total = sum(cfg.splits.values())
    print(f"wrote {total} scapes under {out}")


def cmd_featurize(args):
    src = Path(args.in_dir)
    out = Path(args.out)
    split_dirs = sorted(p for p in src.iterdir() if p.is_dir() and list(p.glob("*.wav")))
    if split_dirs:
        for split_dir in split_dirs:
            featurize_dir(split_dir, out / split_dir.name)
    else:
        featurize_dir(src, out)
    print(f"features written under {out}")


def cmd_train(args):
    cfg = experiment_config(load_config(args.config), args.experiment)
    if cfg.experiment_id == "exp3":
        raise SystemExit("exp3 has no model of its own; train exp1 and exp2")
    data = prepare_run_data(cfg, args.seed, args.root)
    net_cfg, train_cfg = model_setup(cfg, cfg.experiment_id, args.seed)
    net = experiments.get_model(
        data.ds_tag, net_cfg, train_cfg, data.train_set, data.val_set, args.root
    )
    key = experiments._model_key(data.ds_tag, net_cfg, train_cfg)
    print(f"model {key}: {net.param_count()} parameters")
    print(f"weights: {data_root(args.root) / 'models' / key / 'weights.bin'}")


def cmd_predict(args):
    net, _ = load_weights(args.weights)
    names = args.class_names.split(",") if args.class_names else [
        c.name for c in DatasetConfig().classes
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    feats = sorted(Path(args.features).glob("*.f32"))
    if not feats:
        raise SystemExit(f"no .f32 feature files under {args.features}")
    for path in feats:
        values, meta = fileio.load_features(path)
        p_sed, p_sad = net.forward(values)
        if args.reweight:
            p_sed = reweight(p_sed, p_sad)
        fileio.save_matrix(out / f"{path.stem}_sed.f32", p_sed, {"kind": "sed"})
        fileio.save_matrix(out / f"{path.stem}_sad.f32", p_sad, {"kind": "sad"})
        events = decode_events(
            binarize(p_sed, args.sed_threshold), names, meta.get("frame_hop", FRAME_HOP)
        )
        fileio.write_annotations(out / f"{path.stem}.tsv", events)
    print(f"predictions for {len(feats)} files under {out}")


def cmd_evaluate(args):
    ref_by_file = {
        p.stem: fileio.read_annotations(p) for p in sorted(Path(args.ref).glob("*.tsv"))
    }
    if not ref_by_file:
        raise SystemExit(f"no reference .tsv files under {args.ref}")
    sys_by_file = {
        p.stem: fileio.read_annotations(p) for p in sorted(Path(args.est).glob("*.tsv"))
    }
    sys_by_file = {k: v for k, v in sys_by_file.items() if k in ref_by_file}
    report = evaluate_corpus(
        ref_by_file, sys_by_file, args.mode, file_duration=args.file_duration
    )
    print(format_report(report))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        print(f"report written to {args.out}")


def cmd_experiment(args):
    config_dict = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else list(range(1, args.seeds + 1))
    if args.sweep:
        cfg = experiment_config(config_dict, args.id if args.id != "all" else "exp4a")
        if args.sweep == "n_shared":
            values = [int(v) for v in args.sweep_values.split(",")] if args.sweep_values \
                else list(range(len(cfg.network.trunk) + 1))
        else:
            values = [tuple(float(x) for x in pair.split("/"))
                      for pair in (args.sweep_values or "0.7/0.3,0.5/0.5,0.3/0.7").split(",")]
        table = sweep(cfg, args.sweep, values, seeds=seeds, root=args.root)
    elif args.threshold_sweep:
        cfg = experiment_config(config_dict, args.id)
        table = threshold_sweep(cfg, seed=seeds[0], root=args.root)
    elif args.id == "all":
        cfg = experiment_config(config_dict, "exp1")
        table = run_table(cfg, ids=EXPERIMENT_IDS, seeds=seeds, root=args.root)
    else:
        cfg = experiment_config(config_dict, args.id)
        if len(seeds) == 1:
            table = run_experiment(cfg, seed=seeds[0], root=args.root)
        else:
            table = run_table(cfg, ids=(args.id,), seeds=seeds, root=args.root)
    print(table.to_text(), end="")
    print(f"(config digest {table.config_digest}, artifacts under "
          f"{data_root(args.root) / 'runs'})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sedkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize an annotated dataset")
    s.add_argument("--config", help="dataset config JSON")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("featurize", help="extract log-mel features for a dataset")
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", help="train one experiment's model")
    s.add_argument("--experiment", required=True, choices=[e for e in EXPERIMENT_IDS])
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--config", help="experiment config JSON")
    s.add_argument("--root", help="override the artifact root")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="posteriors + event lists from weights")
    s.add_argument("--weights", required=True)
    s.add_argument("--features", required=True, help="directory of .f32 files")
    s.add_argument("--out", required=True)
    s.add_argument("--class-names", help="comma-separated class names")
    s.add_argument("--sed-threshold", type=float, default=experiments.SED_THRESHOLD)
    s.add_argument("--sad-threshold", type=float, default=experiments.SAD_THRESHOLD)
    s.add_argument("--reweight", action="store_true",
                   help="multiply event posteriors by the activity posterior")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="score system TSVs against reference TSVs")
    s.add_argument("--ref", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--mode", required=True, choices=["segment", "event"])
    s.add_argument("--file-duration", type=float, default=10.0)
    s.add_argument("--out", help="also write the report as JSON")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment", help="run a full experiment pipeline")
    s.add_argument("--id", required=True, choices=list(EXPERIMENT_IDS) + ["all"])
    s.add_argument("--seed", type=int, help="run exactly this seed")
    s.add_argument("--seeds", type=int, default=1, help="run seeds 1..N")
    s.add_argument("--config", help="experiment config JSON")
    s.add_argument("--root", help="override the artifact root")
    s.add_argument("--threshold-sweep", action="store_true",
                   help="study thresholds 0.2/0.3/0.4/0.5 on the validation split")
    s.add_argument("--sweep", choices=["n_shared", "loss_weights"])
    s.add_argument("--sweep-values",
                   help="comma list; n_shared ints or a/b weight pairs")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
