"""Desk-scale episode engine around a kinematic proxy walker.

The walker advances at the commanded velocity, follows the heightfield and
raises failure events from simple geometric rules. Perception, observation
assembly, action decoding and the reward ledger run exactly as they would
around a trained controller, which lets any policy be scored on R_succ and
R_trav.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ContractError, Pose, SensorMount
from .lidar import ScanPattern, SensorNoise, corrupt, scan
from .obsact import (ACTION_DIM, CompositeAction, ObsScales, ObservationVector, ProprioState,
                     assemble, decompose_action, raw_from_radius)
from .projection import dual_projection
from .reward import RewardWeights, desired_radius, step_terms, total_reward
from .terrain import TerrainKind, TrackLayout, TrackSpec, assemble_track

DT = 0.02
MAP_DECIMATION = 5
MAX_STEPS = 3000
LATENCY_RANGE = (0.005, 0.045)
OPEN_SPACE = 5.0          # obstacle distance assumed when nothing is sensed
RADIUS_EMA = 0.2
INITIAL_RADIUS = 3.0

# two 6-dof legs: hip pitch, hip roll, hip yaw, knee, ankle pitch, ankle roll
Q_DEFAULT = np.array([-0.1, 0.0, 0.0, 0.3, -0.2, 0.0] * 2)
DOF_LOWER = np.array([-2.5, -0.5, -2.7, -0.1, -0.87, -0.26, -2.5, -2.9, -2.7, -0.1, -0.87, -0.26])
DOF_UPPER = np.array([2.9, 2.9, 2.7, 2.9, 0.52, 0.26, 2.9, 0.5, 2.7, 2.9, 0.52, 0.26])
HIP_JOINTS = [1, 2, 7, 8]
ACTION_SCALE = 0.25

FAILURES = ("collision", "infeasible_foothold", "off_track")


@dataclass(frozen=True)
class WalkerConfig:
    base_height: float = 0.74
    body_radius: float = 0.2
    standing_height: float = 1.2
    crouch_height: float = 1.0
    can_jump: bool = True
    jump_clearance: float = 0.45
    step_clearance: float = 0.3
    max_step_rise: float = 0.3
    step_probe: float = 0.1
    crouch_max_radius: float = 3.0
    lateral_assist: bool = True
    lateral_speed: float = 0.5
    lateral_lookahead: float = 3.0
    swing_time: float = 0.45

    @property
    def low_clearance(self) -> float:
        return self.jump_clearance if self.can_jump else self.step_clearance


@dataclass
class WalkerState:
    pose: Pose
    base_height: float
    v_cmd: np.ndarray
    step_count: int = 0
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(ACTION_DIM))
    prev_r: float = INITIAL_RADIUS
    q: np.ndarray = field(default_factory=lambda: Q_DEFAULT.copy())
    dq: np.ndarray = field(default_factory=lambda: np.zeros(12))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gait_phase: float = 0.0
    air_time: np.ndarray = field(default_factory=lambda: np.zeros(2))
    contact: np.ndarray = field(default_factory=lambda: np.ones(2, dtype=bool))
    crouching: bool = False

    def __post_init__(self):
        if not self.base_height > 0:
            raise ContractError("base_height must be positive")

    @property
    def x(self) -> float:
        return self.pose.position[0]

    @property
    def y(self) -> float:
        return self.pose.position[1]


@dataclass
class StepInfo:
    events: List[str]
    penetration: float
    collisions: int
    first_contact: np.ndarray
    air_time: np.ndarray


def _ground(track: TrackLayout, x: float, y: float) -> float:
    x0, x1, y0, y1 = track.heightfield.extent
    return track.heightfield.sample(min(max(x, x0), x1), min(max(y, y0), y1))


def _lane_target(track: TrackLayout, x: float, cfg: WalkerConfig) -> float:
    """Lateral position that threads the next pole or gate, 0 otherwise."""
    for i, (a, b) in enumerate(track.segments):
        if b <= x - cfg.body_radius:
            continue
        if a > x + cfg.lateral_lookahead:
            break
        p = track.params[i] if i < len(track.params) else {}
        kind = track.kinds[i] if i < len(track.kinds) else None
        boxes = [bx for bx, owner in zip(track.obstacles, track.obstacle_module) if owner == i]
        if boxes and min(bx.hi[0] for bx in boxes) + cfg.body_radius < x:
            continue
        if kind is TerrainKind.NARROW_GATE and "gate_center" in p:
            return float(p["gate_center"])
        if kind is TerrainKind.POLE and "pole_center" in p:
            c = float(p["pole_center"])
            side = 1.0 if c <= 0 else -1.0
            return c + side * (p["pole_width"] / 2 + cfg.body_radius + 0.15)
        if boxes:
            return 0.0
    return 0.0


def step(walker: WalkerState, track: TrackLayout, action: CompositeAction, dt: float = DT,
         cfg: WalkerConfig = WalkerConfig()) -> Tuple[WalkerState, StepInfo]:
    if abs(dt - DT) > 1e-12:
        raise ContractError(f"the control period is fixed at {DT} s")
    x, y, _ = walker.pose.position
    vx, vy = float(walker.v_cmd[0]), float(walker.v_cmd[1])
    if cfg.lateral_assist:
        dy = _lane_target(track, x, cfg) - y
        vy += max(-cfg.lateral_speed, min(cfg.lateral_speed, dy / dt))
    nx, ny = x + vx * dt, y + vy * dt
    g = _ground(track, nx, ny)
    events: List[str] = []

    rise = _ground(track, nx + cfg.step_probe, ny) - g
    if rise > cfg.max_step_rise:
        events.append("infeasible_foothold")

    R = cfg.body_radius
    low = g + cfg.low_clearance
    crouching = False
    for b in track.obstacles:
        lo, hi = b.lo, b.hi
        if b.kind == TerrainKind.BEAM.value and abs(nx - b.center[0]) <= b.half_extents[0] + R:
            if lo[2] - g < cfg.standing_height:
                if "crouch" not in events:
                    events.append("crouch")
                if action.r <= cfg.crouch_max_radius:
                    crouching = True
    top = g + (cfg.crouch_height if crouching else cfg.standing_height)

    collisions, depth = 0, 0.0
    for b in track.obstacles:
        lo, hi = b.lo, b.hi
        if hi[2] <= low or lo[2] >= top:
            continue
        ex = max(lo[0] - nx, 0.0, nx - hi[0])
        ey = max(lo[1] - ny, 0.0, ny - hi[1])
        dist = math.hypot(ex, ey)
        if dist < R:
            collisions += 1
            depth = max(depth, R - dist)
    if collisions:
        events.append("collision")
    if abs(ny) > track.width / 2 - R:
        events.append("off_track")

    # gait proxy: feet alternate swings while the base moves
    moving = math.hypot(vx, vy) > 1e-6
    phase = walker.gait_phase
    contact = np.ones(2, dtype=bool)
    air = walker.air_time.copy()
    if moving:
        phase = (phase + dt / (2.0 * cfg.swing_time)) % 1.0
        contact = np.array([phase >= 0.5, phase < 0.5])
    first = contact & ~walker.contact
    landed = np.where(first, air + dt, 0.0)
    air = np.where(contact, 0.0, air + dt)

    q_new = action.q_target.copy()
    dq_new = (q_new - walker.q) / dt
    new = WalkerState(
        pose=Pose((nx, ny, g + cfg.base_height), walker.pose.yaw),
        base_height=cfg.base_height,
        v_cmd=walker.v_cmd,
        step_count=walker.step_count + 1,
        prev_action=action.mu.copy(),
        prev_r=action.r,
        q=q_new,
        dq=dq_new,
        velocity=np.array([vx, vy, 0.0]),
        gait_phase=phase,
        air_time=air,
        contact=contact,
        crouching=crouching,
    )
    return new, StepInfo(events, depth, collisions, first, landed)


# -- policies ---------------------------------------------------------------------

class Policy:
    """Maps an observation to a raw 13-vector (or a CompositeAction)."""

    def reset(self) -> None:
        pass

    def __call__(self, obs: ObservationVector):
        raise NotImplementedError

    def close(self) -> None:
        pass


class HeuristicRadiusPolicy(Policy):
    """Tracks the desired-radius rule through an EMA; joint channels stay at 0."""

    def __init__(self, alpha: float = RADIUS_EMA, scales: ObsScales = ObsScales()):
        self.alpha = alpha
        self.scales = scales

    def __call__(self, obs: ObservationVector) -> np.ndarray:
        for name in ("v", "D", "r_prev"):
            if name not in obs.layout:
                raise ContractError(f"observation layout lacks {name!r}")
        v_fwd = float(obs.component("v")[0]) / self.scales.v
        r_prev = float(obs.component("r_prev")[0]) / self.scales.r_prev
        d_norm = float(obs.component("D").min())
        d_obs = OPEN_SPACE if d_norm >= 1.0 else d_norm * r_prev
        r_star = desired_radius(v_fwd, d_obs)
        r = r_prev + self.alpha * (r_star - r_prev)
        mu = np.zeros(ACTION_DIM)
        mu[-1] = raw_from_radius(r)
        return mu


class FixedRadiusPolicy(Policy):
    def __init__(self, r: float):
        self.raw = raw_from_radius(r)

    def __call__(self, obs):
        mu = np.zeros(ACTION_DIM)
        mu[-1] = self.raw
        return mu


class ExternalPolicy(Policy):
    """Child process speaking newline-delimited JSON over stdin/stdout.

    Each request is ``{"type": "obs", "step": k, "obs": [...]}``; the first
    one also carries ``"layout"``. The reply is ``{"action": [13 numbers]}``.
    ``reset`` sends ``{"type": "reset"}`` and waits for any reply line.
    """

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self.proc: Optional[subprocess.Popen] = None
        self._sent_layout = False
        self._step = 0

    def _ensure(self):
        if self.proc is None or self.proc.poll() is not None:
            self.proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         text=True, bufsize=1)
            self._sent_layout = False

    def _roundtrip(self, msg: dict) -> dict:
        self._ensure()
        self.proc.stdin.write(json.dumps(msg) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError(f"external policy {self.argv!r} closed its output")
        return json.loads(line)

    def reset(self):
        self._step = 0
        self._roundtrip({"type": "reset"})

    def __call__(self, obs: ObservationVector):
        msg = {"type": "obs", "step": self._step, "obs": obs.values.tolist()}
        if not self._sent_layout:
            msg["layout"] = {k: {"offset": o, "length": n} for k, (o, n) in obs.layout.items()}
            self._sent_layout = True
        self._step += 1
        reply = self._roundtrip(msg)
        return np.asarray(reply["action"], dtype=np.float64)

    def close(self):
        if self.proc is not None:
            if self.proc.poll() is None:
                self.proc.stdin.close()
                try:
                    self.proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self.proc.kill()
            self.proc.stdout.close()
            self.proc = None


def make_policy(name: str, external_cmd: Optional[Sequence[str]] = None) -> Policy:
    if name == "heuristic":
        return HeuristicRadiusPolicy()
    if name == "external":
        if not external_cmd:
            raise ContractError("the external policy needs a command line")
        return ExternalPolicy(external_cmd)
    if name.startswith("fixed:"):
        return FixedRadiusPolicy(float(name.split(":", 1)[1]))
    raise ContractError(f"unknown policy {name!r}")


# -- episodes -----------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    pattern: ScanPattern = ScanPattern.uniform(180, -7.0, 52.0, 20, 8.0)
    noise: SensorNoise = SensorNoise()
    mount: SensorMount = SensorMount()
    walker: WalkerConfig = WalkerConfig()
    weights: RewardWeights = RewardWeights()
    scales: ObsScales = ObsScales()
    max_steps: int = MAX_STEPS
    decimation: int = MAP_DECIMATION


@dataclass
class EpisodeResult:
    r_succ: float
    r_trav: float
    radius_trace: List[float]
    reward_trace: List[float]
    termination: str
    x_trace: List[float] = field(default_factory=list)
    y_trace: List[float] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)
    difficulty: float = 0.0
    steps: int = 0
    latency_ticks: int = 0
    events: Dict[str, int] = field(default_factory=dict)

    @property
    def mean_radius(self) -> float:
        return float(np.mean(self.radius_trace)) if self.radius_trace else INITIAL_RADIUS


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & (2**64 - 1) for p in parts]).generate_state(1, np.uint64)[0])


def _aux_state(w: WalkerState, prev: WalkerState, info: StepInfo, alive: bool) -> dict:
    return {
        "gravity": np.array([0.0, 0.0, -1.0]),
        "ang_vel": np.zeros(3),
        "hip_dev": (w.q - Q_DEFAULT)[HIP_JOINTS],
        "dof_vel": w.dq,
        "dof_acc": (w.dq - prev.dq) / DT,
        "action": w.prev_action,
        "prev_action": prev.prev_action,
        "torque": np.zeros(12),
        "collisions": info.collisions,
        "penetration": info.penetration,
        "dof_pos": w.q,
        "dof_lower": DOF_LOWER,
        "dof_upper": DOF_UPPER,
        "alive": alive,
        "air_time": info.air_time,
        "first_contact": info.first_contact,
    }



def run_episode(track, policy: Policy, cmd, seed: int, cfg: SimConfig = SimConfig()) -> EpisodeResult:
    """Closed loop at 50 Hz with maps refreshed every ``cfg.decimation`` steps."""
    cmd = np.asarray(cmd, dtype=np.float64).reshape(3)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    if isinstance(track, TrackSpec):
        layout = assemble_track(replace(track, seed=derive_seed(track.seed, seed)))
        difficulty = track.difficulty
    else:
        layout = track
        difficulty = float(max(layout.difficulties)) if layout.difficulties else 0.0
    scene = layout.scene()
    wc = cfg.walker
    latency = int(round(rng.uniform(*LATENCY_RANGE) / DT))
    dirs = cfg.pattern.directions()

    g0 = _ground(layout, 0.0, 0.0)
    walker = WalkerState(Pose((0.0, 0.0, g0 + wc.base_height)), wc.base_height, cmd)
    history = deque([ProprioState(q=walker.q - Q_DEFAULT)], maxlen=latency + 1)
    policy.reset()

    radii, rewards, xs, ys = [], [], [], []
    counts: Dict[str, int] = {}
    segments = layout.segments
    cleared = 0
    termination = "step_limit"
    E = D = None
    for k in range(cfg.max_steps):
        if k % cfg.decimation == 0:
            cloud = scan(scene, walker.pose, cfg.pattern, cfg.mount, _dirs=dirs)
            cloud = corrupt(cloud, cfg.noise, rng).sensor_to_base(cfg.mount)
            E, D = dual_projection(cloud, walker.prev_r, base_height=wc.base_height)
        proprio = history[0]
        obs = assemble(cmd, proprio, walker.prev_action, E, D, walker.prev_r, cfg.scales)
        out = policy(obs)
        action = out if isinstance(out, CompositeAction) else decompose_action(out, Q_DEFAULT, ACTION_SCALE)

        prev = walker
        walker, info = step(walker, layout, action, DT, wc)
        for ev in info.events:
            counts[ev] = counts.get(ev, 0) + 1
        failed = any(ev in FAILURES for ev in info.events)

        d_min = float(D.cells.min())
        d_obs = OPEN_SPACE if d_min >= D.radius else d_min
        r_star = desired_radius(float(walker.velocity[0]), d_obs)
        terms = step_terms(walker.velocity, 0.0, cmd, action.r, prev.prev_r, r_star,
                           _aux_state(walker, prev, info, not failed))
        rewards.append(total_reward(terms, cfg.weights).total)
        radii.append(action.r)
        xs.append(walker.x)
        ys.append(walker.y)
        history.append(ProprioState(v=walker.velocity, q=walker.q - Q_DEFAULT, dq=walker.dq))

        if failed:
            termination = "collision"
            break
        while cleared < len(segments) and walker.x >= segments[cleared][1]:
            cleared += 1
        if walker.x >= layout.total_length:
            termination = "completed"
            break

    n_seg = len(segments)
    r_succ = cleared / n_seg if n_seg else 1.0
    r_trav = 1.0 if termination == "completed" else min(1.0, max(0.0, walker.x / layout.total_length))
    return EpisodeResult(
        r_succ=r_succ, r_trav=r_trav, radius_trace=radii, reward_trace=rewards,
        termination=termination, x_trace=xs, y_trace=ys,
        kinds=[k.value for k in layout.kinds], difficulty=difficulty,
        steps=len(radii), latency_ticks=latency, events=counts,
    )


# -- curriculum -----------------------------------------------------------------------

@dataclass(frozen=True)
class CurriculumState:
    difficulty: float = 0.0
    promote_at: float = 0.8
    demote_at: float = 0.3
    step: float = 0.05


def curriculum_update(c: CurriculumState, result: EpisodeResult) -> CurriculumState:
    d = c.difficulty
    if result.r_succ >= c.promote_at:
        d += c.step
    elif result.r_succ <= c.demote_at:
        d -= c.step
    # rounding keeps repeated +/- steps on the decimal grid
    return replace(c, difficulty=min(1.0, max(0.0, round(d, 12))))


# -- batches --------------------------------------------------------------------------

def episode_record(index: int, seed: int, result: EpisodeResult, cmd) -> dict:
    return {
        "episode": index,
        "seed": seed,
        "kinds": result.kinds,
        "c": result.difficulty,
        "cmd": [float(v) for v in cmd],
        "r_succ": result.r_succ,
        "r_trav": result.r_trav,
        "termination": result.termination,
        "mean_radius": result.mean_radius,
        "steps": result.steps,
    }


def _run_one(args):
    spec, policy_name, external_cmd, cmd, index, base_seed, cfg = args
    seed = derive_seed(base_seed, index)
    policy = make_policy(policy_name, external_cmd)
    try:
        res = run_episode(spec, policy, cmd, seed, cfg)
    finally:
        policy.close()
    return index, seed, res


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("DUALPROJ_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ContractError(f"DUALPROJ_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, n_tasks))


def run_batch(spec: TrackSpec, policy_name: str, cmd, n_episodes: int, base_seed: int,
              cfg: SimConfig = SimConfig(), external_cmd: Optional[Sequence[str]] = None,
              workers: Optional[int] = None) -> List[Tuple[int, int, EpisodeResult]]:
    """Episodes ``0..n-1`` with seeds derived from ``(base_seed, index)``, returned in index order."""
    tasks = [(spec, policy_name, external_cmd, list(cmd), i, base_seed, cfg) for i in range(n_episodes)]
    workers = worker_count(len(tasks)) if workers is None else workers
    if workers <= 1:
        out = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_run_one, tasks))
    return sorted(out, key=lambda t: t[0])


def write_jsonl(path, rows: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_trace_csv(path, result: EpisodeResult) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y,r,reward_total\n")
        for k, (x, y, r, rew) in enumerate(zip(result.x_trace, result.y_trace,
                                                 result.radius_trace, result.reward_trace)):
            fh.write(f"{(k + 1) * DT!r},{x!r},{y!r},{r!r},{rew!r}\n")
