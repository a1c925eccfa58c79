"""On-disk formats: JSON-lines datasets, JSON checkpoints, CSV traces, provenance manifests."""
import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .augment import PairedDataset
from .collect import Dataset, Trajectory
from .env import EnvConfig, EnvState
from .learn import EQUIV, GCP, EquivModel, GcpModel, TrainConfig
from .nnmath import MlpParams

DATASET_FORMAT = "gcbatch.dataset/1"
PAIRED_FORMAT = "gcbatch.paired/1"
CHECKPOINT_FORMAT = "gcbatch.checkpoint/1"
MANIFEST_NAME = "manifest.json"


class CorruptFileError(ValueError):
    pass


class TamperedInputError(ValueError):
    pass


def _dumps(obj):
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, allow_nan=False)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def created_stamp():
    # SOURCE_DATE_EPOCH keeps checkpoints byte-reproducible; wall-clock time would not
    return int(os.environ.get("SOURCE_DATE_EPOCH", "0"))


def provenance(inputs=(), config=None):
    return {
        "tool_version": __version__,
        "inputs": {Path(p).name: sha256_file(p) for p in inputs},
        "config_sha256": hashlib.sha256(_dumps(config or {}).encode()).hexdigest(),
    }


# -- datasets ---------------------------------------------------------------

def _state_dict(s):
    return {"pos": list(s.position), "heading": s.heading, "speed": s.speed,
            "velocity": list(s.velocity)}


def _state_from(d):
    return EnvState(tuple(d["pos"]), d["heading"], d["speed"], tuple(d["velocity"]), 0)


def _traj_lines(traj, extra=None):
    for t in range(len(traj)):
        rec = {"ep": traj.episode_id, "t": t, "obs": traj.obs[t].tolist(),
               "act": traj.act[t].tolist(), "pos": traj.pos[t].tolist(),
               "goal": traj.goal[t].tolist()}
        if t == 0:
            rec["init"] = _state_dict(traj.initial_state)
        if extra:
            rec.update(extra)
        yield _dumps(rec)


def _write_lines(path, header, lines):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(header) + "\n")
        for line in lines:
            f.write(line + "\n")
    os.replace(tmp, path)


def _base_header(d):
    return {"env_config": d.env_config.to_dict(), "seed": d.seed,
            "collection_kind": d.collection_kind}


def save_dataset(path, d, prov=None):
    header = {"format": DATASET_FORMAT, **_base_header(d),
              "counts": {"episodes": len(d.trajectories), "transitions": d.n_transitions},
              "provenance": prov or provenance()}

    def lines():
        for traj in d.trajectories:
            yield from _traj_lines(traj)

    _write_lines(path, header, lines())


def save_paired(path, p, prov=None):
    header = {"format": PAIRED_FORMAT, **_base_header(p.base), "augment_seed": p.seed,
              "counts": {"episodes": len(p.base.trajectories), "twins": len(p.twins),
                         "transitions": p.n_transitions},
              "provenance": prov or provenance()}
    n = len(p.base.trajectories)

    def lines():
        for traj in p.base.trajectories:
            yield from _traj_lines(traj)
        for j, (twin, theta) in enumerate(p.twins):
            base_ep = p.base.trajectories[j % n].episode_id
            yield from _traj_lines(twin, {"pair_of": base_ep, "theta": theta})

    _write_lines(path, header, lines())


def read_header(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.loads(f.readline())
    except (OSError, ValueError) as e:
        raise CorruptFileError(f"{path}: unreadable header ({e})") from e


def _group(records, cfg):
    eps, order = {}, []
    for r in records:
        ep = r["ep"]
        if ep not in eps:
            eps[ep] = []
            order.append(ep)
        eps[ep].append(r)
    trajs, meta = [], []
    for ep in order:
        rows = eps[ep]
        if [r["t"] for r in rows] != list(range(len(rows))) or "init" not in rows[0]:
            raise CorruptFileError(f"episode {ep}: records are not contiguous")
        obs = np.array([r["obs"] for r in rows], dtype=np.float64)
        if obs.shape[1] != cfg.obs_dim:
            raise CorruptFileError(f"episode {ep}: observation width {obs.shape[1]}")
        traj = Trajectory(obs, np.array([r["act"] for r in rows], dtype=np.float64),
                          np.array([r["pos"] for r in rows], dtype=np.float64),
                          np.array([r["goal"] for r in rows], dtype=np.float64),
                          _state_from(rows[0]["init"]), ep)
        if not traj.check_contiguous():
            raise CorruptFileError(f"episode {ep}: one-step goals do not chain")
        trajs.append(traj)
        meta.append((rows[0].get("pair_of"), rows[0].get("theta")))
    return trajs, meta


def _load_records(path):
    header = read_header(path)
    records = []
    try:
        with open(path, encoding="utf-8") as f:
            f.readline()
            for line in f:
                records.append(json.loads(line))
    except (OSError, ValueError) as e:
        raise CorruptFileError(f"{path}: unreadable record ({e})") from e
    return header, records


def load_any(path):
    """Load a dataset or paired-dataset file; returns ``Dataset`` or ``PairedDataset``."""
    header, records = _load_records(path)
    fmt = header.get("format")
    if fmt not in (DATASET_FORMAT, PAIRED_FORMAT):
        raise CorruptFileError(f"{path}: unknown format {fmt!r}")
    try:
        cfg = EnvConfig.from_dict(header["env_config"])
        trajs, meta = _group(records, cfg)
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFileError(f"{path}: {e}") from e
    base = [t for t, m in zip(trajs, meta) if m[0] is None]
    twins = [(t, m) for t, m in zip(trajs, meta) if m[0] is not None]
    counts = header.get("counts", {})
    if counts.get("episodes") != len(base) or counts.get("transitions") != sum(len(t) for t in trajs):
        raise CorruptFileError(f"{path}: record counts disagree with header")
    d = Dataset(cfg, base, header["seed"], header["collection_kind"])
    if fmt == DATASET_FORMAT:
        if twins:
            raise CorruptFileError(f"{path}: plain dataset contains twin episodes")
        return d
    by_id = {t.episode_id: i for i, t in enumerate(base)}
    n = len(base)
    pairs = []
    for j, (twin, (pair_of, theta)) in enumerate(twins):
        if by_id.get(pair_of) != j % n:
            raise CorruptFileError(f"{path}: twin episode {twin.episode_id} is misaligned")
        pairs.append((twin, float(theta)))
    if counts.get("twins") != len(pairs):
        raise CorruptFileError(f"{path}: twin count disagrees with header")
    return PairedDataset(d, pairs, header.get("augment_seed", 0))


# -- checkpoints ------------------------------------------------------------

def model_to_dict(model, prov=None):
    meta = {"seed": model.train_config.seed, "created": created_stamp()}
    d = {"format": CHECKPOINT_FORMAT, "kind": model.kind, "method": model.method,
         "env_config": model.env_config.to_dict(), "train_config": model.train_config.to_dict(),
         "skipped": model.skipped, "provenance": prov or provenance()}
    if model.kind == GCP:
        d["policy"] = model.params.to_dict(meta)
    else:
        d["encoder"] = model.encoder.to_dict(meta)
        d["policy"] = model.policy.to_dict(meta)
    return d


def model_from_dict(d):
    if d.get("format") != CHECKPOINT_FORMAT:
        raise CorruptFileError(f"unknown checkpoint format {d.get('format')!r}")
    env_cfg = EnvConfig.from_dict(d["env_config"])
    tc = TrainConfig.from_dict(d["train_config"])
    if d["kind"] == GCP:
        return GcpModel(MlpParams.from_dict(d["policy"]), env_cfg, tc, d["method"],
                        skipped=d.get("skipped", 0))
    if d["kind"] == EQUIV:
        return EquivModel(MlpParams.from_dict(d["encoder"]), MlpParams.from_dict(d["policy"]),
                          env_cfg, tc, d["method"], skipped=d.get("skipped", 0))
    raise CorruptFileError(f"unknown model kind {d['kind']!r}")


def save_model(path, model, prov=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(model_to_dict(model, prov)) + "\n", encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise CorruptFileError(f"{path}: unreadable checkpoint ({e})") from e
    try:
        return model_from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFileError(f"{path}: {e}") from e


# -- CSV --------------------------------------------------------------------

def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def save_traces(stem, model):
    """Per-epoch and per-minibatch loss traces as ``<stem>_trace.csv`` / ``<stem>_minibatch.csv``."""
    stem = Path(stem)
    if model.kind == GCP:
        epochs = [(e, loss, 0.0, loss) for e, loss in model.trace]
        mbs = [(s, e, loss, 0.0, loss) for s, e, loss in model.minibatch_log]
    else:
        epochs, mbs = model.trace, model.minibatch_log
    paths = (stem.with_name(stem.name + "_trace.csv"), stem.with_name(stem.name + "_minibatch.csv"))
    write_csv(paths[0], ["epoch", "total", "l_enc", "l_pi"], epochs)
    write_csv(paths[1], ["step", "epoch", "total", "l_enc", "l_pi"], mbs)
    return paths


# -- manifest ---------------------------------------------------------------

def manifest_path(directory):
    return Path(directory) / MANIFEST_NAME


def load_manifest(directory):
    p = manifest_path(directory)
    if not p.exists():
        return None
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except ValueError as e:
        raise CorruptFileError(f"{p}: unreadable manifest ({e})") from e


def record_stage(directory, name, stage, inputs, outputs, info=None):
    """Add or replace one stage entry in ``<directory>/manifest.json``."""
    directory = Path(directory)
    m = load_manifest(directory) or {"name": name, "tool_version": __version__, "stages": {}}
    m["stages"][stage] = {
        "inputs": {_rel(p, directory): sha256_file(p) for p in inputs},
        "outputs": {_rel(p, directory): sha256_file(p) for p in outputs},
        **(info or {}),
    }
    directory.mkdir(parents=True, exist_ok=True)
    manifest_path(directory).write_text(json.dumps(m, indent=1, sort_keys=True) + "\n",
                                        encoding="utf-8")
    return m


def _rel(p, directory):
    p = Path(p).resolve()
    try:
        return p.relative_to(Path(directory).resolve()).as_posix()
    except ValueError:
        return os.path.relpath(p, Path(directory).resolve())


def verify_input(path):
    """Fail if ``path`` no longer matches the hash its producing stage recorded.

    Also checks the inputs named in the file's own embedded provenance, when
    those files sit next to it.
    """
    path = Path(path)
    m = load_manifest(path.parent)
    if m:
        key = _rel(path, path.parent)
        for stage, entry in m["stages"].items():
            want = entry["outputs"].get(key)
            if want is not None and want != sha256_file(path):
                raise TamperedInputError(f"{path} changed after stage {stage!r} wrote it")
    if path.suffix in (".jsonl", ".json"):
        try:
            head = read_header(path) if path.suffix == ".jsonl" else json.loads(path.read_text())
        except (CorruptFileError, ValueError):
            return
        for name, digest in head.get("provenance", {}).get("inputs", {}).items():
            upstream = path.parent / name
            if upstream.exists() and sha256_file(upstream) != digest:
                raise TamperedInputError(f"{upstream} changed after {path.name} was derived from it")
