"""Command-line entry point.

Exit codes: 0 ok, 2 bad config or unwritable output, 3 corrupt or tampered
data, 4 method/data mismatch, 5 environment mismatch.
"""
import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .augment import PairedDataset, augment_dataset, verify_paired, CorruptDatasetError
from .collect import ONPOLICY, RANDOM, collect_onpolicy, collect_random
from .config import ConfigFileError, default_config_text, load_config
from .evaluate import ConfigurationError, evaluate, multigoal_run
from .learn import EQUIV, GCP, train_equivalence, train_gcp
from . import report, store

log = logging.getLogger("gcbatch")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_METHOD, EXIT_ENV = 0, 2, 3, 4, 5
METHOD_ORDER = ("equivalence", "augmented", "onpolicy", "random")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def out_root():
    return Path(os.environ.get("GCBATCH_OUT", "gcbatch_out"))


def _writable(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(EXIT_CONFIG, f"cannot create {path.parent}: {e}")
    if not os.access(path.parent, os.W_OK):
        raise CliError(EXIT_CONFIG, f"output directory {path.parent} is not writable")
    return path


def _config(path):
    try:
        return load_config(path)
    except ConfigFileError as e:
        raise CliError(EXIT_CONFIG, f"invalid config: {e}")


def _checked(path):
    path = Path(path)
    if not path.exists():
        raise CliError(EXIT_DATA, f"input {path} does not exist")
    try:
        store.verify_input(path)
    except store.TamperedInputError as e:
        raise CliError(EXIT_DATA, str(e))
    return path


def _load_data(path):
    try:
        return store.load_any(_checked(path))
    except store.CorruptFileError as e:
        raise CliError(EXIT_DATA, f"corrupt dataset: {e}")


def _load_model(path):
    try:
        return store.load_model(_checked(path))
    except store.CorruptFileError as e:
        raise CliError(EXIT_DATA, f"corrupt checkpoint: {e}")


# -- stages (shared by the subcommands and the pipeline) ------------------------

def stage_collect(cfg, kind, out, config_path=None):
    out = _writable(out)
    env_cfg = cfg.env
    c = cfg.collect
    if kind == ONPOLICY:
        d = collect_onpolicy(env_cfg, c.episodes, c.horizon, (c.noise_start, c.noise_end), c.seed)
    else:
        d = collect_random(env_cfg, c.episodes, c.horizon, c.seed)
    inputs = [config_path] if config_path else []
    store.save_dataset(out, d, store.provenance(inputs, cfg.to_dict()))
    store.record_stage(out.parent, cfg.name, f"collect:{out.name}", inputs, [out],
                       {"collection_kind": kind, "env_config": env_cfg.to_dict()})
    log.info("collected %d trajectories (%d transitions) -> %s", len(d.trajectories), d.n_transitions, out)
    return d


def stage_augment(src, seed, out, force=False, name="default"):
    out = _writable(out)
    d = _load_data(src)
    if isinstance(d, PairedDataset):
        raise CliError(EXIT_DATA, f"{src} is already a paired dataset")
    if d.collection_kind == RANDOM:
        if not force:
            raise CliError(EXIT_CONFIG, "refusing to augment a RANDOM dataset (use --force for ablations)")
        log.warning("augmenting a RANDOM dataset; rotated noise carries no extra structure")
    p = augment_dataset(d.env_config, d, seed)
    try:
        verify_paired(p)
    except CorruptDatasetError as e:
        raise CliError(EXIT_DATA, f"augmentation failed its own check: {e}")
    store.save_paired(out, p, store.provenance([src], {"augment_seed": seed}))
    store.record_stage(out.parent, name, f"augment:{out.name}", [src], [out], {"augment_seed": seed})
    log.info("augmented %d trajectories -> %s", len(p.twins), out)
    return p


def stage_train(method, data_path, train_cfg, out, name="default"):
    out = _writable(out)
    data = _load_data(data_path)
    if method == EQUIV:
        if not isinstance(data, PairedDataset):
            raise CliError(EXIT_METHOD, "method equiv needs a paired dataset (run augment first)")
        model = train_equivalence(data, train_cfg)
    elif method == GCP:
        model = train_gcp(data.flatten() if isinstance(data, PairedDataset) else data, train_cfg)
    else:
        raise CliError(EXIT_CONFIG, f"unknown method {method!r}")
    store.save_model(out, model, store.provenance([data_path], train_cfg.to_dict()))
    stem = out.with_suffix("")
    traces = store.save_traces(stem, model)
    store.record_stage(out.parent, name, f"train:{out.name}", [data_path], [out, *traces],
                       {"method": model.method, "train_config": train_cfg.to_dict()})
    log.info("trained %s model -> %s", model.method, out)
    return model


def _order(models):
    rank = {m: i for i, m in enumerate(METHOD_ORDER)}
    return sorted(models, key=lambda m: (rank.get(m.method, len(rank)), m.method))


def stage_eval(model_paths, test_cfg, out_dir, env_cfg=None, name="default"):
    out_dir = Path(out_dir)
    _writable(out_dir / "x")
    models = [_load_model(p) for p in model_paths]
    env_cfg = env_cfg or models[0].env_config
    summaries = []
    for path, m in zip(model_paths, models):
        if m.env_config != env_cfg:
            raise CliError(EXIT_ENV, f"{path} was trained on {m.env_config.kind} "
                                     f"{m.env_config.to_dict()}, evaluation env is {env_cfg.to_dict()}")
        try:
            summaries.append(evaluate(m, test_cfg, env_cfg))
        except ConfigurationError as e:
            raise CliError(EXIT_ENV, str(e))
    order = {id(m): i for i, m in enumerate(_order(models))}
    summaries = [s for _, s in sorted(zip(models, summaries), key=lambda t: order[id(t[0])])]
    files = {
        "episodes": out_dir / "episodes.csv", "summary": out_dir / "summary.csv",
        "per_seed": out_dir / "per_seed.csv", "violin": out_dir / "violin.csv",
        "plot": out_dir / "distances.svg",
    }
    report.write_episodes(files["episodes"], summaries)
    report.write_summary(files["summary"], summaries, env_cfg.kind)
    report.write_per_seed(files["per_seed"], summaries)
    report.write_violin(files["violin"], summaries)
    desc = _desc(model_paths)
    report.write_text(files["plot"], report.distance_svg(summaries, f"{env_cfg.kind} closest distance", desc))
    store.record_stage(out_dir, name, "eval", model_paths, list(files.values()),
                       {"test_config": test_cfg.to_dict()})
    for s in summaries:
        log.info("%-12s mean %.4f std %.4f", s.method, s.pooled_mean, s.pooled_std)
    return summaries


def _desc(inputs):
    return "gcbatch " + __version__ + "; inputs: " + "; ".join(
        f"{Path(p).name} sha256={store.sha256_file(p)}" for p in inputs)


def stage_multigoal(model_path, n_goals, test_cfg, out_dir, seed=0, name="default"):
    out_dir = Path(out_dir)
    _writable(out_dir / "x")
    model = _load_model(model_path)
    try:
        trace = multigoal_run(model, n_goals, test_cfg, seed)
    except ValueError as e:
        raise CliError(EXIT_CONFIG, str(e))
    stem = Path(model_path).stem
    csv_path, svg_path = out_dir / f"multigoal_{stem}.csv", out_dir / f"multigoal_{stem}.svg"
    report.write_trace(csv_path, trace)
    report.write_text(svg_path, report.trace_svg(trace, f"{model.method} ({model.env_config.kind})",
                                                 _desc([model_path])))
    store.record_stage(out_dir, name, f"multigoal:{stem}", [model_path], [csv_path, svg_path],
                       {"n_goals": n_goals, "seed": seed, "achieved": trace.achieved,
                        "alignment": trace.alignment})
    log.info("%s reached %d/%d goals, alignment %.3f", model.method, trace.achieved, n_goals,
             trace.alignment)
    return trace


def run_pipeline(cfg, root, config_path=None, multigoal_seeds=(0, 1)):
    """Collect, augment, train all four methods and evaluate, for every env in the config."""
    root = Path(root)
    rows = []
    for kind in cfg.envs:
        t0 = time.time()
        sub = cfg.__class__(**{**cfg.__dict__, "env": cfg.env_for(kind)})
        d = root / kind
        stage_collect(sub, ONPOLICY, d / "onpolicy.jsonl", config_path)
        stage_collect(sub, RANDOM, d / "random.jsonl", config_path)
        stage_augment(d / "onpolicy.jsonl", cfg.augment_seed, d / "paired.jsonl", name=cfg.name)
        ckpts = [
            stage_train(EQUIV, d / "paired.jsonl", cfg.equiv, d / "equivalence.json", cfg.name),
            stage_train(GCP, d / "paired.jsonl", cfg.gcp, d / "augmented.json", cfg.name),
            stage_train(GCP, d / "onpolicy.jsonl", cfg.gcp, d / "onpolicy.json", cfg.name),
            stage_train(GCP, d / "random.jsonl", cfg.gcp, d / "random.json", cfg.name),
        ]
        paths = [d / f"{m.method}.json" for m in ckpts]
        summaries = stage_eval(paths, cfg.test, d / "eval", sub.env, cfg.name)
        for s in summaries:
            rows.append([kind, s.method, s.pooled_mean, s.pooled_std])
        for seed in multigoal_seeds:
            for m in ("equivalence", "onpolicy"):
                stage_multigoal(d / f"{m}.json", 4, cfg.test, d / "multigoal" / f"seed{seed}", seed, cfg.name)
        log.info("%s finished in %.1fs", kind, time.time() - t0)
    store.write_csv(root / "table.csv", ["env", "method", "mean", "std"], rows)
    return rows


# -- argparse -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="gcbatch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--backend", choices=kernels.available(), help="kernel backend override")
    sp = p.add_subparsers(dest="cmd", required=True)

    c = sp.add_parser("collect", help="collect a batch dataset")
    c.add_argument("--config")
    c.add_argument("--kind", choices=["onpolicy", "random"], default="onpolicy")
    c.add_argument("--env", help="override [env] kind")
    c.add_argument("--out")

    a = sp.add_parser("augment", help="add rotated twins to a dataset")
    a.add_argument("--in", dest="src", required=True)
    a.add_argument("--seed", type=int, default=1)
    a.add_argument("--out")
    a.add_argument("--force", action="store_true", help="allow augmenting RANDOM datasets")

    t = sp.add_parser("train", help="train a policy checkpoint")
    t.add_argument("--method", choices=[GCP, EQUIV], required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out")

    e = sp.add_parser("eval", help="evaluate checkpoints on a shared episode set")
    e.add_argument("--model", nargs="+", required=True)
    e.add_argument("--test-config")
    e.add_argument("--out")

    m = sp.add_parser("multigoal", help="chase consecutive goals with one checkpoint")
    m.add_argument("--model", required=True)
    m.add_argument("--goals", type=int, default=4)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--test-config")
    m.add_argument("--out")

    pl = sp.add_parser("pipeline", help="run every stage for all envs and methods")
    pl.add_argument("--config")
    pl.add_argument("--out")

    sp.add_parser("default-config", help="print the default config file")
    return p


def _has_env_section(path):
    if not path:
        return False
    import configparser
    cp = configparser.ConfigParser(interpolation=None)
    cp.read(path, encoding="utf-8")
    return cp.has_section("env")


def dispatch(args):
    root = out_root()
    if args.cmd == "default-config":
        sys.stdout.write(default_config_text())
    elif args.cmd == "collect":
        cfg = _config(args.config)
        if args.env:
            try:
                cfg.env = cfg.env_for(args.env.upper())
            except ValueError as e:
                raise CliError(EXIT_CONFIG, str(e))
        kind = ONPOLICY if args.kind == "onpolicy" else RANDOM
        out = args.out or root / f"{args.kind}_{cfg.env.kind}.jsonl"
        stage_collect(cfg, kind, out, args.config)
    elif args.cmd == "augment":
        out = args.out or Path(args.src).with_name(Path(args.src).stem + "_paired.jsonl")
        stage_augment(args.src, args.seed, out, args.force)
    elif args.cmd == "train":
        cfg = _config(args.config)
        tc = cfg.equiv if args.method == EQUIV else cfg.gcp
        out = args.out or root / f"{Path(args.data).stem}_{args.method}.json"
        stage_train(args.method, args.data, tc, out, cfg.name)
    elif args.cmd == "eval":
        cfg = _config(args.test_config)
        env_cfg = cfg.env if _has_env_section(args.test_config) else None
        stage_eval(args.model, cfg.test, args.out or root / "eval", env_cfg, cfg.name)
    elif args.cmd == "multigoal":
        cfg = _config(args.test_config)
        stage_multigoal(args.model, args.goals, cfg.test, args.out or root / "multigoal", args.seed, cfg.name)
    elif args.cmd == "pipeline":
        cfg = _config(args.config)
        for kind, method, mean, std in run_pipeline(cfg, args.out or root, args.config):
            print(f"{kind:11s} {method:12s} {mean:.4f} +- {std:.4f}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.backend:
        kernels.use(args.backend)
    try:
        dispatch(args)
    except CliError as e:
        print(f"gcbatch: error: {e}", file=sys.stderr)
        return e.code
    except OSError as e:
        print(f"gcbatch: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
