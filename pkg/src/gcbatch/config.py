"""INI experiment configuration with full defaulting.

Every section and key is optional; missing keys take the library defaults.
Ranges are written as two comma-separated numbers, angles in radians.
"""
import configparser
import math
from dataclasses import dataclass, field, replace

from .env import KINDS, EnvConfig
from .evaluate import TestConfig
from .learn import TrainConfig


class ConfigFileError(ValueError):
    pass


@dataclass
class CollectConfig:
    episodes: int = 500
    horizon: int = 200
    noise_start: float = 0.5
    noise_end: float = 0.05
    seed: int = 0


@dataclass
class ExperimentConfig:
    name: str = "default"
    envs: tuple = KINDS
    env: EnvConfig = field(default_factory=EnvConfig)
    collect: CollectConfig = field(default_factory=CollectConfig)
    augment_seed: int = 1
    gcp: TrainConfig = field(default_factory=TrainConfig)
    equiv: TrainConfig = field(default_factory=TrainConfig)
    test: TestConfig = field(default_factory=TestConfig)

    def env_for(self, kind):
        return replace(self.env, kind=kind)

    def to_dict(self):
        c = self.collect
        return {"name": self.name, "envs": list(self.envs), "env": self.env.to_dict(),
                "collect": {"episodes": c.episodes, "horizon": c.horizon,
                            "noise_schedule": [c.noise_start, c.noise_end], "seed": c.seed},
                "augment_seed": self.augment_seed, "train_gcp": self.gcp.to_dict(),
                "train_equiv": self.equiv.to_dict(), "test": self.test.to_dict()}


def _pair(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _ints(text):
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(",") if p.strip())


def _dims(text):
    dims = tuple(int(p) for p in text.split(",") if p.strip())
    if not dims or min(dims) < 1:
        raise ValueError(f"expected comma-separated positive layer widths, got {text!r}")
    return dims


def _train(sec, base):
    if sec is None:
        return base
    return TrainConfig(
        lam=sec.getfloat("lambda", base.lam),
        embed_dim=sec.getint("embed_dim", base.embed_dim),
        lr=sec.getfloat("lr", base.lr),
        minibatch=sec.getint("minibatch", base.minibatch),
        epochs=sec.getint("epochs", base.epochs),
        hidden_dims=_dims(sec["hidden_dims"]) if "hidden_dims" in sec else base.hidden_dims,
        policy_hidden_dims=(_dims(sec["policy_hidden_dims"]) if "policy_hidden_dims" in sec
                            else base.policy_hidden_dims),
        seed=sec.getint("seed", base.seed),
    )


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
        return _build(cp)
    except (configparser.Error, ValueError, TypeError) as e:
        raise ConfigFileError(str(e)) from e


def load_config(path=None):
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigFileError(f"cannot read config {path}: {e}") from e
    return parse_config(text)


def _sec(cp, name):
    return cp[name] if cp.has_section(name) else None


def _build(cp):
    known = {"experiment", "env", "collect", "augment", "train", "train.gcp", "train.equiv", "test"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    d = ExperimentConfig()
    ex = _sec(cp, "experiment")
    if ex is not None:
        d.name = ex.get("name", d.name)
        if "envs" in ex:
            d.envs = tuple(k.strip().upper() for k in ex["envs"].split(",") if k.strip())
            bad = [k for k in d.envs if k not in KINDS]
            if bad or not d.envs:
                raise ValueError(f"unknown environment kinds: {bad}")
    e = _sec(cp, "env")
    if e is not None:
        d.env = EnvConfig(kind=e.get("kind", d.env.kind).upper(),
                          dt=e.getfloat("dt", d.env.dt), v_max=e.getfloat("v_max", d.env.v_max),
                          accel_max=e.getfloat("accel_max", d.env.accel_max),
                          turn_max=e.getfloat("turn_max", d.env.turn_max),
                          drag=e.getfloat("drag", d.env.drag))
    c = _sec(cp, "collect")
    if c is not None:
        start, end = (_pair(c["noise_schedule"]) if "noise_schedule" in c
                      else (d.collect.noise_start, d.collect.noise_end))
        d.collect = CollectConfig(c.getint("episodes", d.collect.episodes),
                                  c.getint("horizon", d.collect.horizon), start, end,
                                  c.getint("seed", d.collect.seed))
        if d.collect.episodes < 1 or d.collect.horizon < 1:
            raise ValueError("collect.episodes and collect.horizon must be >= 1")
        if min(start, end) < 0:
            raise ValueError("noise scales must be >= 0")
    a = _sec(cp, "augment")
    if a is not None:
        d.augment_seed = a.getint("seed", d.augment_seed)
    shared = _train(_sec(cp, "train"), TrainConfig())
    d.gcp = _train(_sec(cp, "train.gcp"), shared)
    d.equiv = _train(_sec(cp, "train.equiv"), shared)
    t = _sec(cp, "test")
    if t is not None:
        base = d.test
        d.test = TestConfig(
            goal_dist_range=_pair(t["goal_dist_range"]) if "goal_dist_range" in t else base.goal_dist_range,
            goal_angle_range=(_pair(t["goal_angle_range"]) if "goal_angle_range" in t
                              else base.goal_angle_range),
            max_steps=t.getint("max_steps", base.max_steps),
            reach_threshold=t.getfloat("reach_threshold", base.reach_threshold),
            episodes_per_seed=t.getint("episodes_per_seed", base.episodes_per_seed),
            seeds=_ints(t["seeds"]) if "seeds" in t else base.seeds,
        )
        if d.test.episodes_per_seed < 1 or not d.test.seeds:
            raise ValueError("test needs >= 1 seed and >= 1 episode per seed")
    return d


def default_config_text():
    t = TrainConfig()
    tc = TestConfig()
    c = CollectConfig()
    e = EnvConfig()
    return f"""\
# gcbatch experiment configuration; every key is optional
[experiment]
name = default
envs = {", ".join(KINDS)}

[env]
# kind is used by single-env subcommands (collect); pipeline iterates over experiment.envs
kind = {e.kind}
dt = {e.dt}
v_max = {e.v_max}
accel_max = {e.accel_max}
turn_max = {e.turn_max}
drag = {e.drag}

[collect]
episodes = {c.episodes}
horizon = {c.horizon}
noise_schedule = {c.noise_start}, {c.noise_end}
seed = {c.seed}

[augment]
seed = 1

[train]
lambda = {t.lam}
embed_dim = {t.embed_dim}
lr = {t.lr}
minibatch = {t.minibatch}
epochs = {t.epochs}
hidden_dims = {", ".join(map(str, t.hidden_dims))}
policy_hidden_dims = {", ".join(map(str, t.policy_hidden_dims))}
seed = {t.seed}

# [train.gcp] and [train.equiv] override [train] per method

[test]
goal_dist_range = {tc.goal_dist_range[0]}, {tc.goal_dist_range[1]}
goal_angle_range = {-math.pi / 4!r}, {math.pi / 4!r}
max_steps = {tc.max_steps}
reach_threshold = {tc.reach_threshold}
episodes_per_seed = {tc.episodes_per_seed}
seeds = 0..9
"""
