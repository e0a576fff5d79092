"""Physics-consistent morphology sampling.

Links are deformed through :func:`morphforge.inertia.perturb`, so every
sampled body stays physically consistent. Joints get scaled positions,
limits and torques, permuted hip axes, zero-sum hip orientation offsets,
and a random revolute/fixed actuation pattern.

Link range tables hold multiplicative factor ranges: ``alpha`` and ``d*``
rows bound ``exp(alpha)`` and ``exp(d_i)``; shears are stored as
``f - 1``; translations as ``(f - 1) * c_i`` with ``c_i`` the template
link's CoM coordinate. A ``[1, 1]`` row is therefore the identity.

All randomness flows from a single ``numpy.random.Generator(PCG64(seed))``
so a sample is a pure function of (template, config, seed).
"""

from __future__ import annotations

import fnmatch
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InconsistentTemplate, UnknownGroup, ZeroReferenceMass
from .inertia import ThetaInert, perturb_params
from .robot_model import FIXED, RobotTemplate, link_is_consistent

RNG_ALGORITHM = "PCG64"
THETA_KEYS = ThetaInert.names()

# Link-space ranges (factor semantics, see module docstring).
_LINK_ROWS = {
    #          Shoulder     Torso        Pelvis       Hip          Knee         Foot
    "alpha": [(0.8, 1.4), (0.8, 1.5), (0.8, 1.5), (0.8, 1.5), (0.8, 1.5), (0.8, 1.4)],
    "d1":    [(0.8, 1.2), (0.8, 1.5), (0.8, 1.4), (0.8, 1.2), (0.8, 1.2), (0.5, 1.5)],
    "d2":    [(0.8, 1.2), (0.8, 1.4), (0.8, 1.4), (0.8, 1.2), (0.8, 1.2), (0.5, 1.2)],
    "d3":    [(0.8, 1.2), (0.8, 1.2), (0.8, 1.2), (0.5, 1.5), (0.5, 1.5), (0.8, 1.2)],
    "s12":   [(0.9, 1.1)] * 6,
    "s23":   [(0.9, 1.1)] * 6,
    "s13":   [(0.9, 1.1), (0.9, 1.1), (0.9, 1.1), (0.9, 1.1), (0.8, 1.1), (0.9, 1.1)],
    "t1":    [(0.8, 1.2)] * 6,
    "t2":    [(0.8, 1.2)] * 6,
    "t3":    [(0.7, 1.3)] * 5 + [(0.8, 1.2)],
}
LINK_GROUPS = ("Shoulder", "Torso", "Pelvis", "Hip", "Knee", "Foot")
DEFAULT_LINK_RANGES = {
    g: {k: list(_LINK_ROWS[k][i]) for k in THETA_KEYS} for i, g in enumerate(LINK_GROUPS)
}

DEFAULT_JOINT_RANGES = {
    "Shoulder": {"position": [0.8, 1.2], "limits": [0.8, 1.0], "torque": [0.7, 1.0], "actuation": "R/F"},
    "Waist": {"position": [0.8, 1.2], "limits": [0.8, 1.0], "torque": [0.7, 1.0], "actuation": "R/F"},
    "Hip": {
        "position": [0.8, 1.2],
        "orientation_offset": [-0.3, 0.3],
        "limits": [0.8, 1.0],
        "torque": [0.7, 1.0],
        "permute_axes": True,
        "actuation": "R",
    },
    "Knee": {"position": [0.8, 1.2], "limits": [0.8, 1.3], "torque": [0.7, 1.0], "actuation": "R"},
    "Ankle": {"position": [0.8, 1.2], "limits": [0.8, 1.0], "torque": [0.7, 1.0], "actuation": "R"},
}

# Group assignment for the bundled template (fnmatch patterns, first match wins).
DEFAULT_LINK_GROUPS = {
    "pelvis": "Pelvis",
    "torso_link": "Torso",
    "waist_*_link": "Torso",
    "*_hip_*_link": "Hip",
    "*_knee_link": "Knee",
    "*_ankle_*_link": "Foot",
    "*_shoulder_*_link": "Shoulder",
    "*_elbow_link": "Shoulder",
    "*_wrist_*_link": "Shoulder",
}
DEFAULT_JOINT_GROUPS = {
    "*_hip_*_joint": "Hip",
    "*_knee_joint": "Knee",
    "*_ankle_*_joint": "Ankle",
    "waist_*_joint": "Waist",
    "*_shoulder_*_joint": "Shoulder",
    "*_elbow_joint": "Shoulder",
    "*_wrist_*_joint": "Shoulder",
    "head_*_joint": "Head",
}
DEFAULT_HIP_SETS = [
    ["left_hip_pitch_joint", "left_hip_roll_joint", "left_hip_yaw_joint"],
    ["right_hip_pitch_joint", "right_hip_roll_joint", "right_hip_yaw_joint"],
]
DEFAULT_LOCKABLE = ["waist_*_joint", "head_*_joint", "*_shoulder_*_joint", "*_elbow_joint", "*_wrist_*_joint"]
DEFAULT_GAINS = {
    "Hip": [100.0, 2.0],
    "Knee": [150.0, 4.0],
    "Ankle": [40.0, 2.0],
    "Waist": [200.0, 5.0],
    "Shoulder": [40.0, 1.0],
    "Head": [10.0, 0.5],
    "default": [20.0, 0.5],
}
LEG_GROUPS = ("Hip", "Knee", "Ankle")
LOCK_MODES = ("uniform_count", "bernoulli")
THETA_MODES = ("per_link", "per_group")


def _range(v, what):
    try:
        lo, hi = (float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected [lo, hi], got {v!r}") from None
    if not lo <= hi:
        raise ConfigError(f"{what}: lo > hi in {v!r}")
    return [lo, hi]


def _match(table, name):
    for pattern, group in table.items():
        if fnmatch.fnmatchcase(name, pattern):
            return group
    return None


@dataclass
class RandomizationConfig:
    seed: int = 0
    link_ranges: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_LINK_RANGES)))
    joint_ranges: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_JOINT_RANGES)))
    link_groups: dict = field(default_factory=lambda: dict(DEFAULT_LINK_GROUPS))
    joint_groups: dict = field(default_factory=lambda: dict(DEFAULT_JOINT_GROUPS))
    hip_sets: list = field(default_factory=lambda: [list(s) for s in DEFAULT_HIP_SETS])
    lockable: list = field(default_factory=lambda: list(DEFAULT_LOCKABLE))
    lock_mode: str = "uniform_count"
    lock_probability: float = 0.5
    theta_mode: str = "per_link"
    gain_reference: float | None = None
    gains: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GAINS.items()})

    def __post_init__(self):
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.lock_mode not in LOCK_MODES:
            raise ConfigError(f"lock_mode must be one of {LOCK_MODES}")
        if self.theta_mode not in THETA_MODES:
            raise ConfigError(f"theta_mode must be one of {THETA_MODES}")
        if not 0.0 <= self.lock_probability <= 1.0:
            raise ConfigError("lock_probability must lie in [0, 1]")
        for g, rows in self.link_ranges.items():
            for k in THETA_KEYS:
                if k not in rows:
                    raise ConfigError(f"link range {g!r} lacks row {k!r}")
                rows[k] = _range(rows[k], f"links.{g}.{k}")
            if set(rows) - set(THETA_KEYS):
                raise ConfigError(f"link range {g!r}: unknown rows {sorted(set(rows) - set(THETA_KEYS))}")
        for g, spec in self.joint_ranges.items():
            for k in ("position", "orientation_offset", "limits", "torque"):
                if k in spec and spec[k] is not None:
                    spec[k] = _range(spec[k], f"joints.{g}.{k}")
        for g, v in self.gains.items():
            if len(v) != 2:
                raise ConfigError(f"gains.{g}: expected [kp, kd]")

    # -- lookup helpers -------------------------------------------------
    def link_group(self, name):
        return _match(self.link_groups, name)

    def joint_group(self, name):
        return _match(self.joint_groups, name)

    def leg_joints(self, r: RobotTemplate):
        return {j.name for j in r.joints if self.joint_group(j.name) in LEG_GROUPS}

    def lockable_joints(self, r: RobotTemplate):
        """Expand lockable patterns against ``r``; template order."""
        names = [j.name for j in r.joints if j.revolute]
        out = set()
        for pat in self.lockable:
            hits = [n for n in names if fnmatch.fnmatchcase(n, pat)]
            if not hits and not any(ch in pat for ch in "*?["):
                raise ConfigError(f"lockable joint {pat!r} not in template")
            out.update(hits)
        legs = self.leg_joints(r) & out
        if legs:
            raise ConfigError(f"leg joints can never be lockable: {sorted(legs)}")
        return [n for n in names if n in out]

    def resolved_gain_reference(self, template: RobotTemplate):
        ref = self.gain_reference if self.gain_reference is not None else template.total_mass()
        if not ref > 0.0:
            raise ZeroReferenceMass(f"gain reference mass must be positive, got {ref}")
        return float(ref)

    # -- serialization --------------------------------------------------
    def to_dict(self):
        return {
            "rng": RNG_ALGORITHM,
            "seed": self.seed,
            "ranges": {"links": self.link_ranges, "joints": self.joint_ranges},
            "groups": {"links": self.link_groups, "joints": self.joint_groups},
            "hip_sets": self.hip_sets,
            "lockable": self.lockable,
            "lock_mode": self.lock_mode,
            "lock_probability": self.lock_probability,
            "theta_mode": self.theta_mode,
            "gain_reference": self.gain_reference,
            "gains": self.gains,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        rng = d.get("rng", RNG_ALGORITHM)
        if rng != RNG_ALGORITHM:
            raise ConfigError(f"unsupported rng {rng!r}; only {RNG_ALGORITHM} is available")
        known = {"rng", "seed", "ranges", "groups", "hip_sets", "lockable", "lock_mode",
                 "lock_probability", "theta_mode", "gain_reference", "gains"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        ranges = d.get("ranges", {})
        groups = d.get("groups", {})
        try:
            return cls(
                seed=d.get("seed", 0),
                link_ranges=ranges.get("links", base.link_ranges),
                joint_ranges=ranges.get("joints", base.joint_ranges),
                link_groups=groups.get("links", base.link_groups),
                joint_groups=groups.get("joints", base.joint_groups),
                hip_sets=d.get("hip_sets", base.hip_sets),
                lockable=d.get("lockable", base.lockable),
                lock_mode=d.get("lock_mode", base.lock_mode),
                lock_probability=d.get("lock_probability", base.lock_probability),
                theta_mode=d.get("theta_mode", base.theta_mode),
                gain_reference=d.get("gain_reference"),
                gains=d.get("gains", base.gains),
            )
        except (TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None

    @classmethod
    def identity(cls, **kw):
        """Config whose every range collapses to the identity."""
        cfg = cls(**kw)
        for rows in cfg.link_ranges.values():
            for k in rows:
                rows[k] = [1.0, 1.0]
        for spec in cfg.joint_ranges.values():
            for k in ("position", "limits", "torque"):
                spec[k] = [1.0, 1.0]
            if "orientation_offset" in spec:
                spec["orientation_offset"] = [0.0, 0.0]
            spec["permute_axes"] = False
        cfg.lockable = []
        return cfg


@dataclass
class EmbodimentSample:
    robot: RobotTemplate
    applied_theta: dict
    locked: set
    axis_permutations: dict
    hip_offsets: dict
    scaled_gains: dict
    sample_seed: int

    @property
    def active_joints(self):
        return self.robot.n_d

    def metadata(self):
        """Sidecar provenance record (JSON-serializable)."""
        return {
            "sample_seed": self.sample_seed,
            "rng": RNG_ALGORITHM,
            "applied_theta": {k: v.to_dict() for k, v in self.applied_theta.items()},
            "locked": sorted(self.locked),
            "active_joints": self.active_joints,
            "axis_permutations": {k: list(v) for k, v in self.axis_permutations.items()},
            "hip_offsets": {k: list(v) for k, v in self.hip_offsets.items()},
            "scaled_gains": {k: {"kp": v[0], "kd": v[1], "tau_max": v[2]} for k, v in self.scaled_gains.items()},
            "total_mass": self.robot.total_mass(),
        }


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def _factor_rows(group, ranges):
    if group not in ranges:
        raise UnknownGroup(f"no link range table for group {group!r}")
    rows = ranges[group]
    lo = np.array([rows[k][0] for k in THETA_KEYS])
    hi = np.array([rows[k][1] for k in THETA_KEYS])
    return lo, hi


def sample_factors(group, ranges, rng):
    lo, hi = _factor_rows(group, ranges)
    return rng.uniform(lo, hi)


def theta_from_factors(f, char_length=(0.0, 0.0, 0.0)):
    """Convert 10 factor draws to a ThetaInert (see module docstring)."""
    ell = np.asarray(char_length, dtype=float)
    return ThetaInert(
        alpha=math.log(f[0]),
        d1=math.log(f[1]),
        d2=math.log(f[2]),
        d3=math.log(f[3]),
        s12=f[4] - 1.0,
        s23=f[5] - 1.0,
        s13=f[6] - 1.0,
        t1=(f[7] - 1.0) * ell[0],
        t2=(f[8] - 1.0) * ell[1],
        t3=(f[9] - 1.0) * ell[2],
    )


def sample_theta(group, ranges, rng, char_length=(0.0, 0.0, 0.0)) -> ThetaInert:
    return theta_from_factors(sample_factors(group, ranges, rng), char_length)


def randomize_links(r: RobotTemplate, cfg: RandomizationConfig, rng):
    """Perturb every grouped, massive link. Returns (robot, {link: theta})."""
    out = r.copy()
    applied = {}
    shared = {}
    for link in out.links:
        group = cfg.link_group(link.name)
        if group is None or link.massless:
            continue
        if not link_is_consistent(link):
            raise InconsistentTemplate(f"template link {link.name!r} is not physically consistent")
        if cfg.theta_mode == "per_group":
            if group not in shared:
                shared[group] = sample_factors(group, cfg.link_ranges, rng)
            f = shared[group]
        else:
            f = sample_factors(group, cfg.link_ranges, rng)
        theta = theta_from_factors(f, link.inertial.com)
        link.inertial = perturb_params(link.inertial, theta)
        applied[link.name] = theta
    return out, applied


def zero_sum_offsets(rng, lo, hi, n=3):
    """Draw n offsets in [lo, hi] whose sum is zero (mean-subtract + reject)."""
    if lo == hi:
        return np.zeros(n)
    while True:
        d = rng.uniform(lo, hi, n)
        d = d - d.mean()
        if np.all(d >= lo) and np.all(d <= hi):
            return d


def randomize_joints(r: RobotTemplate, cfg: RandomizationConfig, rng):
    """Returns (robot, axis_permutations, hip_offsets)."""
    out = r.copy()
    for j in out.joints:
        if not j.revolute:
            continue
        spec = cfg.joint_ranges.get(cfg.joint_group(j.name))
        if spec is None:
            continue
        if spec.get("position") is not None:
            f = rng.uniform(*spec["position"], size=3)
            delta = (f - 1.0) * j.p
            parent = out.link(j.parent).inertial
            bound = 2.0 * (np.linalg.norm(parent.com) if parent.m > 0.0 else 0.0)
            norm = np.linalg.norm(delta)
            if norm > bound:
                delta *= bound / norm
            j.p = j.p + delta
        if spec.get("limits") is not None:
            f_range, f_vel = rng.uniform(*spec["limits"], size=2)
            j.q_min *= f_range
            j.q_max *= f_range
            j.qdot_max *= f_vel
        if spec.get("torque") is not None:
            j.tau_max *= rng.uniform(*spec["torque"])

    perms, offsets = {}, {}
    for hip_set in cfg.hip_sets:
        present = [n for n in hip_set if any(j.name == n and j.revolute for j in out.joints)]
        if not present:
            continue
        spec = cfg.joint_ranges.get(cfg.joint_group(present[0]), {})
        joints = [out.joint(n) for n in present]
        if spec.get("permute_axes") and len(joints) > 1:
            perm = rng.permutation(len(joints))
            axes = [jt.a.copy() for jt in joints]
            for jt, k in zip(joints, perm):
                jt.a = axes[k]
            perms[present[0]] = [int(k) for k in perm]
        if spec.get("orientation_offset") is not None:
            delta = zero_sum_offsets(rng, *spec["orientation_offset"])
            joints[0].e = joints[0].e + delta
            offsets[present[0]] = [float(x) for x in delta]
    return out, perms, offsets


def sample_actuation(r: RobotTemplate, cfg: RandomizationConfig, rng):
    """Pick the set of lockable joints that become fixed."""
    lockable = cfg.lockable_joints(r)
    if not lockable:
        return set()
    if cfg.lock_mode == "bernoulli":
        draws = rng.random(len(lockable))
        return {n for n, u in zip(lockable, draws) if u < cfg.lock_probability}
    # uniform number of locked joints, then a uniform subset of that size
    k = int(rng.integers(0, len(lockable) + 1))
    chosen = rng.permutation(len(lockable))[:k]
    return {lockable[i] for i in chosen}


def apply_locks(r: RobotTemplate, locked):
    out = r.copy()
    for j in out.joints:
        if j.name in locked:
            j.actuation = FIXED
    return out


def scale_actuation_gains(r: RobotTemplate, cfg: RandomizationConfig, gain_reference=None):
    """joint -> (kp, kd, tau_max), scaled by total_mass(r) / gain_reference."""
    ref = cfg.gain_reference if gain_reference is None else gain_reference
    if ref is None or not ref > 0.0:
        raise ZeroReferenceMass(f"gain reference mass must be positive, got {ref}")
    ratio = r.total_mass() / ref
    out = {}
    for j in r.joints:
        if not j.revolute:
            continue
        kp, kd = cfg.gains.get(cfg.joint_group(j.name), cfg.gains.get("default", [0.0, 0.0]))
        out[j.name] = (kp * ratio, kd * ratio, j.tau_max * ratio)
    return out


def check_template(r: RobotTemplate):
    for link in r.links:
        if not link_is_consistent(link):
            raise InconsistentTemplate(f"template link {link.name!r} is not physically consistent")


def generate(r: RobotTemplate, cfg: RandomizationConfig, seed=None) -> EmbodimentSample:
    """One embodiment: links -> joints -> actuation -> gains."""
    seed = cfg.seed if seed is None else int(seed)
    check_template(r)
    ref = cfg.resolved_gain_reference(r)
    rng = make_rng(seed)
    robot, applied = randomize_links(r, cfg, rng)
    robot, perms, offsets = randomize_joints(robot, cfg, rng)
    locked = sample_actuation(robot, cfg, rng)
    robot = apply_locks(robot, locked)
    gains = scale_actuation_gains(robot, cfg, ref)
    for j in robot.joints:
        if j.name in gains:
            j.tau_max = gains[j.name][2]
    return EmbodimentSample(robot, applied, locked, perms, offsets, gains, seed)


def derive_seed(seed, index):
    return (int(seed) ^ int(index)) & (2**64 - 1)


def generate_batch(r: RobotTemplate, cfg: RandomizationConfig, count, seed=None):
    base = cfg.seed if seed is None else int(seed)
    return [generate(r, cfg, derive_seed(base, i)) for i in range(count)]
