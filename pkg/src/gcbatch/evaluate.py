"""Goal-reaching test protocol: randomised start orientations, closest-distance metric."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collect import EXPERT_GAIN
from .env import Action, EnvState, env_reset, env_step, goal_input, motion_block
from .learn import infer_action, kernel_net

EPISODE_SALT = 0x7E57
MULTIGOAL_SALT = 0x6A15


class ConfigurationError(ValueError):
    pass


@dataclass
class TestConfig:
    __test__ = False  # not a pytest class

    goal_dist_range: tuple = (2.0, 5.0)
    goal_angle_range: tuple = (-math.pi / 4, math.pi / 4)
    max_steps: int = 1000
    reach_threshold: float = 0.5
    episodes_per_seed: int = 100
    seeds: tuple = tuple(range(10))

    def __post_init__(self):
        self.goal_dist_range = tuple(float(v) for v in self.goal_dist_range)
        self.goal_angle_range = tuple(float(v) for v in self.goal_angle_range)
        self.seeds = tuple(int(s) for s in self.seeds)
        lo, hi = self.goal_dist_range
        if not 0 < lo <= hi:
            raise ValueError("goal_dist_range must satisfy 0 < min <= max")
        if self.goal_angle_range[0] > self.goal_angle_range[1]:
            raise ValueError("goal_angle_range must be ordered")
        if not self.reach_threshold > 0 or self.max_steps < 1:
            raise ValueError("reach_threshold and max_steps must be positive")

    def to_dict(self):
        return {"goal_dist_range": list(self.goal_dist_range),
                "goal_angle_range": list(self.goal_angle_range),
                "max_steps": self.max_steps, "reach_threshold": self.reach_threshold,
                "episodes_per_seed": self.episodes_per_seed, "seeds": list(self.seeds)}


@dataclass
class EpisodeResult:
    closest_distance: float
    reached: bool
    steps_taken: int
    path: list = field(default_factory=list)
    headings: list = field(default_factory=list)


@dataclass
class MetricsSummary:
    method: str
    per_seed: list      # (seed, mean, std)
    pooled_mean: float
    pooled_std: float
    episode_records: list


def _uniform(rng, lo, hi):
    # rng.uniform(a, a) returns a, so collapsed ranges give exact values
    return float(rng.uniform(lo, hi))


def sample_test_episode(cfg, rng):
    """Agent at the origin with a random heading; goal ahead within the bearing cone."""
    heading = _uniform(rng, 0.0, 2.0 * math.pi)
    dist = _uniform(rng, *cfg.goal_dist_range)
    bearing = _uniform(rng, *cfg.goal_angle_range)
    state = EnvState((0.0, 0.0), kernels.norm_angle(heading))
    ang = heading + bearing
    return state, (dist * math.cos(ang), dist * math.sin(ang))


def episode_rng(seed, episode):
    return np.random.default_rng([EPISODE_SALT, int(seed), int(episode)])


def episode_set(test_cfg):
    """Every ``(seed, episode, state, goal)`` of the protocol; independent of any model."""
    out = []
    for seed in test_cfg.seeds:
        for ep in range(test_cfg.episodes_per_seed):
            state, goal = sample_test_episode(test_cfg, episode_rng(seed, ep))
            out.append((seed, ep, state, goal))
    return out


def _check_model(env_cfg, model):
    if model.env_config != env_cfg:
        raise ConfigurationError(
            f"model was trained on {model.env_config.kind}, evaluated on {env_cfg.kind}")
    if model.networks()[0].layer_dims[0] != env_cfg.obs_dim + 2:
        raise ConfigurationError("model input dim does not match the environment observation")


def _rollout(env_cfg, model, states, goals, test_cfg, record):
    _check_model(env_cfg, model)
    n = len(states)
    pos = np.array([s.position for s in states], dtype=np.float64).reshape(n, 2)
    heading = np.array([s.heading for s in states], dtype=np.float64)
    motion = np.array([motion_block(env_cfg, s) for s in states], dtype=np.float64).reshape(n, 2)
    goals = np.array(goals, dtype=np.float64).reshape(n, 2)
    return kernels.policy_rollout(env_cfg.kind_code, env_cfg.params(), *kernel_net(model), pos,
                                  heading, motion, goals, int(test_cfg.max_steps),
                                  float(test_cfg.reach_threshold), record)


def run_episode(env_cfg, model, episode, test_cfg):
    """Run one episode to reach or timeout.

    ``model`` is a trained model (rolled out by the kernel) or any callable
    ``policy(state, goal) -> Action`` (rolled out step by step).
    """
    state, goal = episode
    if callable(model):
        return _run_policy(env_cfg, model, state, goal, test_cfg)
    closest, reached, steps, paths = _rollout(env_cfg, model, [state], [goal], test_cfg, True)
    k = int(steps[0])
    rows = paths[0, :k + 1]
    return EpisodeResult(float(closest[0]), bool(reached[0]), k,
                         [tuple(r) for r in rows[:, :2].tolist()], rows[:, 2].tolist())


def _run_policy(env_cfg, policy, state, goal, test_cfg):
    path, headings = [state.position], [state.heading]
    best = math.inf
    for k in range(test_cfg.max_steps + 1):
        d = math.hypot(goal[0] - state.position[0], goal[1] - state.position[1])
        best = min(best, d)
        if k == test_cfg.max_steps:
            break
        if d <= test_cfg.reach_threshold:
            return EpisodeResult(best, True, k, path, headings)
        state, _ = env_step(env_cfg, state, policy(state, goal))
        path.append(state.position)
        headings.append(state.heading)
    return EpisodeResult(best, False, test_cfg.max_steps, path, headings)


def _stats(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


def summarize(method, records):
    per_seed = []
    for seed in sorted({r["seed"] for r in records}):
        per_seed.append((seed, *_stats([r["closest_distance"] for r in records if r["seed"] == seed])))
    mean, std = _stats([r["closest_distance"] for r in records])
    return MetricsSummary(method, per_seed, mean, std, records)


def evaluate(model, test_cfg=None, env_cfg=None):
    """Closest-distance statistics over the fixed episode set of ``test_cfg``."""
    test_cfg = test_cfg or TestConfig()
    env_cfg = env_cfg or model.env_config
    eps = episode_set(test_cfg)
    if not eps:
        raise ValueError("test config yields no episodes")
    closest, reached, steps, _ = _rollout(env_cfg, model, [e[2] for e in eps], [e[3] for e in eps],
                                          test_cfg, False)
    records = []
    for i, (seed, ep, state, goal) in enumerate(eps):
        records.append({
            "seed": seed, "episode": ep, "goal_x": goal[0], "goal_y": goal[1],
            "init_heading": state.heading, "closest_distance": float(closest[i]),
            "reached": bool(reached[i]), "steps": int(steps[i]),
        })
    return summarize(getattr(model, "method", "model"), records)


def goal_bearing(record):
    """World-frame bearing of the goal seen from the start point, in (-pi, pi]."""
    return math.atan2(record["goal_y"], record["goal_x"])


def bearing_split(records, inner_deg=10.0, outer_deg=90.0):
    """Mean closest distance for goals near the data-collection direction (+x) vs. far from it.

    The collection expert only ever walked along +x, so goals whose bearing is
    within ``inner_deg`` of +x are in-distribution for a policy trained on its data.
    """
    inner = [r["closest_distance"] for r in records if abs(goal_bearing(r)) <= math.radians(inner_deg)]
    outer = [r["closest_distance"] for r in records if abs(goal_bearing(r)) >= math.radians(outer_deg)]
    return (float(np.mean(inner)) if inner else math.nan, len(inner),
            float(np.mean(outer)) if outer else math.nan, len(outer))


@dataclass
class QualTrace:
    goals: list
    achieved: int
    rows: list   # (step, x, y, heading, goal_x, goal_y) after each step
    start: tuple
    start_heading: float

    @property
    def alignment(self):
        """Mean cos(heading - bearing to the active goal) over the trace."""
        vals = []
        for _, x, y, h, gx, gy in self.rows:
            if (gx, gy) != (x, y):
                vals.append(math.cos(h - math.atan2(gy - y, gx - x)))
        return float(np.mean(vals)) if vals else math.nan


def multigoal_goals(n_goals, test_cfg, seed=0):
    """Consecutive goals, each placed relative to the direction of the previous leg."""
    if n_goals < 1:
        raise ValueError("n_goals must be >= 1")
    rng = np.random.default_rng([MULTIGOAL_SALT, int(seed)])
    heading = _uniform(rng, 0.0, 2.0 * math.pi)
    prev, direction, goals = (0.0, 0.0), heading, []
    for _ in range(n_goals):
        dist = _uniform(rng, *test_cfg.goal_dist_range)
        ang = direction + _uniform(rng, *test_cfg.goal_angle_range)
        g = (prev[0] + dist * math.cos(ang), prev[1] + dist * math.sin(ang))
        goals.append(g)
        direction, prev = ang, g
    return kernels.norm_angle(heading), goals


def multigoal_run(model, n_goals=4, test_cfg=None, seed=0, env_cfg=None):
    """Chase ``n_goals`` goals in one episode; a new goal becomes active on each reach."""
    test_cfg = test_cfg or TestConfig()
    env_cfg = env_cfg or model.env_config
    if not callable(model):
        _check_model(env_cfg, model)
    heading, goals = multigoal_goals(n_goals, test_cfg, seed)
    state = env_reset(env_cfg, (0.0, 0.0), heading)
    act = model if callable(model) else (lambda s, g: infer_action(model, s, g))
    achieved, rows = 0, []
    for step in range(test_cfg.max_steps):
        goal = goals[achieved]
        if math.hypot(goal[0] - state.position[0], goal[1] - state.position[1]) <= test_cfg.reach_threshold:
            achieved += 1
            if achieved == n_goals:
                break
            goal = goals[achieved]
        state, _ = env_step(env_cfg, state, act(state, goal))
        rows.append((step + 1, state.position[0], state.position[1], state.heading, goal[0], goal[1]))
    return QualTrace(goals, achieved, rows, (0.0, 0.0), heading)


def expert_policy(state, goal):
    """Scripted oracle: steer straight at the goal at full thrust."""
    u = goal_input(state.position, goal)
    err = kernels.wrap_angle(math.atan2(u[1], u[0]) - state.heading)
    return Action(1.0, EXPERT_GAIN * err).clamped()
