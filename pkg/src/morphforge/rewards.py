"""Pure reward-term evaluators over a single state snapshot.

Every term is reported raw (before weighting) and weighted; the total is
the weighted sum. Tracking kernels lie in (0, 1]; every other row has a
non-positive weight and a non-negative raw value, so it can only lower the
total.

Slot groups (canonical indices): upper body = arms 18-31, head = 15-17,
hip roll/yaw = 0, 2, 6, 8. The waist is excluded from the upper group
because its angles are commanded directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .canonical import ARM_SLOTS, HEAD_SLOTS, N_MAX
from .encoder import CommandVector
from .errors import InvalidStanceRatio, ShapeMismatch

N_FEET = 2
UPPER_SLOTS = ARM_SLOTS
HIP_XZ_SLOTS = (0, 2, 6, 8)

DEFAULT_WEIGHTS = {
    "lin_vel": 2.5,
    "ang_vel": 2.0,
    "height": -20.0,
    "torso_pitch": -10.0,
    "waist_yaw": -1.0,
    "waist_roll": -1.0,
    "waist_pitch": -2.0,
    "contact_swing": -2.0,
    "rp_ang_vel": -0.5,
    "vertical_vel": -0.1,
    "feet_slip": -0.2,
    "action_rate": -0.01,
    "action_smoothness": -0.01,
    "joint_torque": -5e-6,
    "joint_accel": -2.5e-7,
    "upper_dev": -0.5,
    "head_dev": -0.5,
    "hip_dev": -1.0,
    "zero_actions": -0.05,
    "termination": -40.0,
}
TERMS = tuple(DEFAULT_WEIGHTS)
TRACKING_TERMS = ("lin_vel", "ang_vel")

# Contact-swing normalisers for squared foot force (N^2) and speed (m^2/s^2).
FORCE_SCALE = 50.0
SPEED_SCALE = 5.0
VEL_SIGMA = 0.2


def gait_phase(c: CommandVector, foot: int, t: float):
    """Phase in [0, 1) and contact flag for one foot.

    ``phase = frac(psi * t + phi_foot)``; the foot is in stance (C = 1)
    while ``phase < phi_stance``.
    """
    if not 0.0 < c.phi_stance < 1.0:
        raise InvalidStanceRatio(f"stance ratio must lie in (0, 1), got {c.phi_stance}")
    offset = (c.phi_1, c.phi_2)[foot]
    phase = math.fmod(c.psi * t + offset, 1.0)
    if phase < 0.0:
        phase += 1.0
    if phase >= 1.0:  # -tiny + 1.0 can round up to 1.0
        phase = 0.0
    return phase, int(phase < c.phi_stance)


def _v(x, n, what):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise ShapeMismatch(f"{what}: expected length {n}, got {x.shape[0]}")
    return x


@dataclass
class StateSnapshot:
    v_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v_z: float = 0.0
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    h: float = 0.0
    p: float = 0.0
    theta_y: float = 0.0
    theta_p: float = 0.0
    theta_r: float = 0.0
    f_foot: np.ndarray = field(default_factory=lambda: np.zeros(N_FEET))
    v_foot: np.ndarray = field(default_factory=lambda: np.zeros((N_FEET, 2)))
    q: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    qd: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    qdd: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    tau: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    kp: np.ndarray = field(default_factory=lambda: np.ones(N_MAX))
    a_t: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    a_prev: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    a_prev2: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    q_nominal: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    I: np.ndarray = field(default_factory=lambda: np.ones(N_MAX))
    terminated: bool = False
    t: float = 0.0

    def __post_init__(self):
        self.v_xy = _v(self.v_xy, 2, "v_xy")
        self.omega = _v(self.omega, 3, "omega")
        self.f_foot = _v(self.f_foot, N_FEET, "f_foot")
        self.v_foot = _v(self.v_foot, 2 * N_FEET, "v_foot").reshape(N_FEET, 2)
        for name in ("q", "qd", "qdd", "tau", "kp", "a_t", "a_prev", "a_prev2", "q_nominal", "I"):
            setattr(self, name, _v(getattr(self, name), N_MAX, name))
        self.terminated = bool(self.terminated)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class RewardBreakdown:
    raw: dict
    weights: dict
    weighted: dict
    total: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _sq(x):
    x = np.asarray(x, dtype=float)
    return float(np.dot(x.ravel(), x.ravel()))


def evaluate_rewards(
    s: StateSnapshot,
    c: CommandVector,
    weights=None,
    contact_swing_form="bounded",
    feet_slip_form="mean",
) -> RewardBreakdown:
    """Evaluate every reward row for one snapshot.

    ``contact_swing_form="bounded"`` uses ``1 - exp(-x)`` kernels, which
    vanish at zero error and saturate at 1; ``"literal"`` uses
    ``exp(x) - 1`` and overflows for realistic foot forces.
    ``feet_slip_form="mean"`` averages the per-foot kernels so the row lies
    in [0, 1); ``"literal"`` sums them.
    """
    w = dict(DEFAULT_WEIGHTS)
    if weights:
        unknown = set(weights) - set(w)
        if unknown:
            raise KeyError(f"unknown reward terms: {sorted(unknown)}")
        w.update(weights)

    raw = {}
    raw["lin_vel"] = math.exp(-_sq(np.array([c.v_x, c.v_y]) - s.v_xy) / VEL_SIGMA)
    raw["ang_vel"] = math.exp(-((c.w_z - s.omega[2]) ** 2) / VEL_SIGMA)
    raw["height"] = (c.h - s.h) ** 2
    raw["torso_pitch"] = (c.p - s.p) ** 2
    raw["waist_yaw"] = (c.theta_y - s.theta_y) ** 2
    raw["waist_roll"] = (c.theta_r - s.theta_r) ** 2
    raw["waist_pitch"] = (c.theta_p - s.theta_p) ** 2

    cs = 0.0
    for i in range(N_FEET):
        _, C = gait_phase(c, i, s.t)
        fx = s.f_foot[i] ** 2 / FORCE_SCALE
        vx = _sq(s.v_foot[i]) / SPEED_SCALE
        if contact_swing_form == "bounded":
            cs += (1 - C) * -math.expm1(-fx) + C * -math.expm1(-vx)
        elif contact_swing_form == "literal":
            with np.errstate(over="ignore"):
                cs += (1 - C) * float(np.expm1(fx)) + C * float(np.expm1(vx))
        else:
            raise ValueError(f"unknown contact-swing form {contact_swing_form!r}")
    raw["contact_swing"] = cs

    raw["rp_ang_vel"] = _sq(s.omega[:2])
    raw["vertical_vel"] = s.v_z**2
    kernels = [math.exp(-_sq(s.v_foot[i])) for i in range(N_FEET)]
    if feet_slip_form == "mean":
        raw["feet_slip"] = 1.0 - sum(kernels) / N_FEET
    elif feet_slip_form == "literal":
        raw["feet_slip"] = 1.0 - sum(kernels)
    else:
        raise ValueError(f"unknown feet-slip form {feet_slip_form!r}")
    raw["action_rate"] = _sq(s.a_t - s.a_prev)
    raw["action_smoothness"] = _sq(s.a_prev2 - 2 * s.a_prev + s.a_t)
    # slots without a P gain (absent joints) contribute nothing
    ratio = np.divide(s.tau, s.kp, out=np.zeros(N_MAX), where=s.kp > 0)
    raw["joint_torque"] = _sq(ratio)
    raw["joint_accel"] = _sq(s.qdd)
    dev = s.q - s.q_nominal
    raw["upper_dev"] = _sq(dev[list(UPPER_SLOTS)])
    raw["head_dev"] = _sq(dev[list(HEAD_SLOTS)])
    raw["hip_dev"] = _sq(dev[list(HIP_XZ_SLOTS)])
    raw["zero_actions"] = float(np.sum((s.I != 0) * s.a_t**2))
    raw["termination"] = float(s.terminated)

    weighted = {k: w[k] * raw[k] for k in TERMS}
    return RewardBreakdown(raw, {k: w[k] for k in TERMS}, weighted, float(sum(weighted.values())))
