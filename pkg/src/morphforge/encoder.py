"""Desk-scale forward passes of the cross-embodiment policy.

Pipeline::

    history, I, c --assemble_observation--> PolicyInput (554 values)
    PolicyInput   --embed_nodes-->          X (32 x D), one projection per slot
    X, M          --gcn_forward | attention_forward--> Z (32 x D)
    Z             --estimate_state-->       P (base velocity xyz, base height)
    Z, P, o_g     --decode_actions-->       a_global (32), a_r (n_r)
    Z', priv      --critic_value-->         scalar, mean over present slots

Per-slot node features (16 values, oldest frame first)::

    [q_t-4, qd_t-4, a_t-5, q_t-3, qd_t-3, a_t-4, ..., q_t, qd_t, a_t-1, I]

``o_g = [omega_t, g_t, c]`` (18 values) is shared by every node decoder.

All forward functions accept plain arrays or :class:`morphforge.autodiff.Dual`
inputs so Jacobians can be taken by forward mode. No training is done here.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .canonical import N_MAX, JointMap, unproject
from .errors import InvalidStanceRatio, ShapeMismatch, WrongHistoryLength

HISTORY = 5
FRAME_SIZE = 3 + 3 + 3 * N_MAX  # 102
COMMAND_SIZE = 12
OBS_SIZE = HISTORY * FRAME_SIZE + N_MAX + COMMAND_SIZE  # 554
NODE_FEATURES = 3 * HISTORY + 1  # 16
GLOBAL_OBS = 3 + 3 + COMMAND_SIZE  # 18
STATE_SIZE = 4
LN_EPS = 1e-5

VARIANTS = ("gcn", "transformer")
HYBRID_ORDERS = ("masked-first", "global-first")
ACTIVATIONS = {"elu": ad.elu, "relu": ad.relu, "leaky_relu": ad.leaky_relu}


def _vec(x, n, what):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise ShapeMismatch(f"{what}: expected length {n}, got {x.shape[0]}")
    return x


# ---------------------------------------------------------------------------
# observations


@dataclass
class CommandVector:
    """Whole-body command: velocity, posture and gait targets."""

    v_x: float = 0.0
    v_y: float = 0.0
    w_z: float = 0.0
    h: float = 0.0
    p: float = 0.0
    theta_y: float = 0.0
    theta_p: float = 0.0
    theta_r: float = 0.0
    psi: float = 1.0
    phi_1: float = 0.0
    phi_2: float = 0.5
    phi_stance: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.phi_stance < 1.0:
            raise InvalidStanceRatio(f"stance ratio must lie in (0, 1), got {self.phi_stance}")

    def as_array(self):
        return np.array([getattr(self, f) for f in self.__dataclass_fields__], dtype=float)

    @classmethod
    def from_array(cls, x):
        return cls(*_vec(x, COMMAND_SIZE, "command").tolist())


@dataclass
class ProprioFrame:
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    g: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    q: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    qd: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))
    a_prev: np.ndarray = field(default_factory=lambda: np.zeros(N_MAX))

    def __post_init__(self):
        self.omega = _vec(self.omega, 3, "omega")
        self.g = _vec(self.g, 3, "gravity")
        self.q = _vec(self.q, N_MAX, "q")
        self.qd = _vec(self.qd, N_MAX, "qd")
        self.a_prev = _vec(self.a_prev, N_MAX, "a_prev")
        if abs(np.linalg.norm(self.g) - 1.0) > 1e-6:
            raise ValueError(f"gravity direction must be unit length, got norm {np.linalg.norm(self.g)}")

    def as_array(self):
        return np.concatenate([self.omega, self.g, self.q, self.qd, self.a_prev])


@dataclass
class PolicyInput:
    history: list  # 5 ProprioFrames, oldest first
    I: np.ndarray
    c: CommandVector

    def flat(self):
        return np.concatenate([f.as_array() for f in self.history] + [self.I.astype(float), self.c.as_array()])

    def node_features(self):
        """(32, 16) per-slot features, layout in the module docstring."""
        cols = []
        for f in self.history:
            cols += [f.q, f.qd, f.a_prev]
        cols.append(self.I.astype(float))
        return np.stack(cols, axis=1)

    def global_obs(self):
        last = self.history[-1]
        return np.concatenate([last.omega, last.g, self.c.as_array()])


def assemble_observation(history, I, c) -> PolicyInput:
    history = list(history)
    if len(history) != HISTORY:
        raise WrongHistoryLength(f"expected {HISTORY} frames, got {len(history)}")
    if not isinstance(c, CommandVector):
        c = CommandVector.from_array(c)
    I = np.asarray(I).reshape(-1)
    if I.shape[0] != N_MAX:
        raise ShapeMismatch(f"controllability mask: expected {N_MAX}, got {I.shape[0]}")
    return PolicyInput(history, (I != 0).astype(np.int64), c)


# ---------------------------------------------------------------------------
# configuration and weights


@dataclass(frozen=True)
class EncoderConfig:
    D: int = 32
    layers: int = 2
    heads: int = 4
    variant: str = "transformer"
    hybrid_order: str = "masked-first"
    activation: str = "elu"
    estimator_hidden: int = 64
    decoder_hidden: int = 32
    critic_hidden: int = 32
    privileged_dim: int = 16
    dtype: str = "float64"

    def __post_init__(self):
        if self.D < 1 or self.layers < 1 or self.heads < 1:
            raise ValueError("D, layers and heads must be positive")
        if self.D % self.heads:
            raise ValueError(f"D={self.D} is not divisible by heads={self.heads}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.hybrid_order not in HYBRID_ORDERS:
            raise ValueError(f"hybrid_order must be one of {HYBRID_ORDERS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    def masked_layers(self):
        """Indices of the graph-masked attention layers."""
        if self.hybrid_order == "masked-first":
            return {0}
        return set(range(1, self.layers))


def weight_shapes(cfg: EncoderConfig) -> dict:
    D, n = cfg.D, N_MAX
    s = {"embed.W": (n, NODE_FEATURES, D), "embed.b": (n, D)}
    for l in range(cfg.layers):
        if cfg.variant == "gcn":
            s[f"gcn{l}.W"] = (D, D)
            s[f"gcn{l}.b"] = (D,)
        else:
            for m in ("Wq", "Wk", "Wv", "Wo"):
                s[f"attn{l}.{m}"] = (D, D)
            s[f"attn{l}.ln_g"] = (D,)
            s[f"attn{l}.ln_b"] = (D,)
    if cfg.variant == "transformer":
        s["pos"] = (n, D)
    s.update(_mlp_shapes("est", n * D, cfg.estimator_hidden, STATE_SIZE))
    s.update(_mlp_shapes("dec", D + STATE_SIZE + GLOBAL_OBS, cfg.decoder_hidden, 1, nodes=n))
    s.update(_mlp_shapes("critic", D + cfg.privileged_dim, cfg.critic_hidden, 1, nodes=n))
    return s


def _mlp_shapes(prefix, n_in, hidden, n_out, nodes=None):
    lead = () if nodes is None else (nodes,)
    if hidden == 0:
        return {f"{prefix}.W0": lead + (n_in, n_out), f"{prefix}.b0": lead + (n_out,)}
    return {
        f"{prefix}.W0": lead + (n_in, hidden),
        f"{prefix}.b0": lead + (hidden,),
        f"{prefix}.W1": lead + (hidden, n_out),
        f"{prefix}.b1": lead + (n_out,),
    }


@dataclass
class EncoderWeights:
    cfg: EncoderConfig
    params: dict
    seed: int | None = None

    def __getitem__(self, key):
        return self.params[key]

    def validate(self):
        expected = weight_shapes(self.cfg)
        if set(expected) != set(self.params):
            missing = sorted(set(expected) - set(self.params))
            extra = sorted(set(self.params) - set(expected))
            raise ShapeMismatch(f"weight names differ: missing {missing}, unexpected {extra}")
        for k, shp in expected.items():
            if tuple(self.params[k].shape) != shp:
                raise ShapeMismatch(f"{k}: expected shape {shp}, got {tuple(self.params[k].shape)}")

    def zeros_like(self):
        return EncoderWeights(self.cfg, {k: np.zeros_like(v) for k, v in self.params.items()}, self.seed)


def init_weights(cfg: EncoderConfig, seed=0) -> EncoderWeights:
    """Seeded init: weights ~ N(0, 1/fan_in), biases 0, LayerNorm (1, 0), pos ~ N(0, 0.02^2)."""
    rng = np.random.default_rng(seed)
    dt = np.dtype(cfg.dtype)
    params = {}
    for k, shp in weight_shapes(cfg).items():
        leaf = k.rsplit(".", 1)[-1]
        if leaf == "ln_g":
            v = np.ones(shp)
        elif leaf.startswith("b") or leaf == "ln_b":
            v = np.zeros(shp)
        elif k == "pos":
            v = 0.02 * rng.standard_normal(shp)
        else:
            v = rng.standard_normal(shp) / np.sqrt(shp[-2])
        params[k] = v.astype(dt)
    return EncoderWeights(cfg, params, seed)


_MAGIC = b"MFWB\x00\x01"


def save_weights(w: EncoderWeights, path):
    """Flat binary: magic, uint32 header length, JSON header, float64 LE data."""
    w.validate()
    arrays, offset = [], 0
    for k in sorted(w.params):
        a = np.asarray(w.params[k])
        arrays.append({"name": k, "shape": list(a.shape), "offset": offset})
        offset += a.size
    header = json.dumps({"config": asdict(w.cfg), "seed": w.seed, "arrays": arrays}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for k in sorted(w.params):
            fh.write(np.asarray(w.params[k], dtype="<f8").tobytes())


def load_weights(path) -> EncoderWeights:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise ShapeMismatch("not a weight bundle (bad magic)")
    (n,) = struct.unpack_from("<I", blob, len(_MAGIC))
    start = len(_MAGIC) + 4
    header = json.loads(blob[start:start + n].decode("utf-8"))
    data = np.frombuffer(blob, dtype="<f8", offset=start + n)
    cfg = EncoderConfig(**header["config"])
    params = {}
    for a in header["arrays"]:
        size = int(np.prod(a["shape"], dtype=np.int64))
        if a["offset"] + size > data.size:
            raise ShapeMismatch(f"{a['name']}: bundle truncated")
        params[a["name"]] = data[a["offset"]:a["offset"] + size].reshape(a["shape"]).astype(cfg.dtype)
    w = EncoderWeights(cfg, params, header.get("seed"))
    w.validate()
    return w


# ---------------------------------------------------------------------------
# building blocks


def _check_nodes(X, D=None):
    shp = ad.value_of(X).shape
    if len(shp) != 2 or shp[0] != N_MAX or (D is not None and shp[1] != D):
        raise ShapeMismatch(f"node matrix must be ({N_MAX}, {D if D else 'D'}), got {shp}")


def _check_mask(M):
    M = np.asarray(M)
    if M.shape != (N_MAX, N_MAX):
        raise ShapeMismatch(f"mask must be {N_MAX}x{N_MAX}, got {M.shape}")
    return M != 0


def _mlp(x, w, prefix, act, per_node=False):
    """Dense stack; with ``per_node`` each of the 32 rows has its own weights."""
    i = 0
    while f"{prefix}.W{i}" in w.params:
        W, b = w[f"{prefix}.W{i}"], w[f"{prefix}.b{i}"]
        if per_node:
            # x: (32, n_in) -> (32, 1, n_in) @ (32, n_in, n_out)
            x = (x.reshape(N_MAX, 1, -1) @ W).reshape(N_MAX, -1) + b
        else:
            x = x @ W + b
        i += 1
        if f"{prefix}.W{i}" in w.params:
            x = act(x)
    return x


def layer_norm(x, g, b, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc * ad.reciprocal(ad.sqrt(var + eps)) * g + b


def masked_softmax(scores, allowed):
    """Softmax over the last axis with ``-inf`` added outside ``allowed``."""
    s = ad.where(allowed, scores, -np.inf)
    shift = ad.value_of(s).max(axis=-1, keepdims=True)
    e = ad.exp(s - shift)
    return e / e.sum(axis=-1, keepdims=True)


def multi_head_attention(X, allowed, Wq, Wk, Wv, Wo, heads):
    """Returns (output (32, D), attention weights (heads, 32, 32))."""
    n, D = ad.value_of(X).shape
    dh = D // heads

    def split(Y):  # (n, D) -> (heads, n, dh)
        return Y.reshape(n, heads, dh).transpose(1, 0, 2)

    Q, K, V = split(X @ Wq), split(X @ Wk), split(X @ Wv)
    scores = (Q @ K.swapaxes(-1, -2)) / np.sqrt(dh)
    A = masked_softmax(scores, allowed[None, :, :])
    out = (A @ V).transpose(1, 0, 2).reshape(n, D)
    return out @ Wo, A


def _present(present):
    if present is None:
        return np.ones(N_MAX, dtype=bool)
    p = np.asarray(present).reshape(-1) != 0
    if p.shape[0] != N_MAX:
        raise ShapeMismatch(f"presence flags: expected {N_MAX}, got {p.shape[0]}")
    return p


# ---------------------------------------------------------------------------
# forward passes


def embed_nodes(inp, w: EncoderWeights):
    """Node-specific linear projections: ``X[i] = f_i @ W_i + b_i``.

    ``inp`` is a :class:`PolicyInput` or a raw (32, 16) feature matrix.
    """
    F = inp.node_features() if isinstance(inp, PolicyInput) else inp
    if ad.value_of(F).shape != (N_MAX, NODE_FEATURES):
        raise ShapeMismatch(f"node features must be ({N_MAX}, {NODE_FEATURES}), got {ad.value_of(F).shape}")
    W, b = w["embed.W"], w["embed.b"]
    if W.shape[:2] != (N_MAX, NODE_FEATURES):
        raise ShapeMismatch(f"embed.W has shape {W.shape}")
    return (F.reshape(N_MAX, 1, NODE_FEATURES) @ W).reshape(N_MAX, -1) + b


def normalized_adjacency(M):
    """``D^-1/2 M D^-1/2`` with ``D`` the row sums of the (self-looped) mask."""
    Mb = _check_mask(M).astype(float)
    d = Mb.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return inv[:, None] * Mb * inv[None, :]


def gcn_forward(X, M, w: EncoderWeights):
    """Stacked graph convolutions ``act(A_hat X W + b)``."""
    cfg = w.cfg
    _check_nodes(X, cfg.D)
    A_hat = normalized_adjacency(M)
    act = ACTIVATIONS[cfg.activation]
    Z = X
    for l in range(cfg.layers):
        Z = act(A_hat @ (Z @ w[f"gcn{l}.W"]) + w[f"gcn{l}.b"])
    return Z


def attention_forward(X, M, w: EncoderWeights, present=None, return_attention=False):
    """Hybrid-mask Transformer encoder.

    Each layer is ``LayerNorm(X + MHA(X))``. Masked layers restrict
    attention to ``M``; global layers attend everywhere. Absent slots stay
    as tokens but are never attended to by other slots.
    """
    cfg = w.cfg
    _check_nodes(X, cfg.D)
    Mb = _check_mask(M)
    p = _present(present)
    eye = np.eye(N_MAX, dtype=bool)
    global_allowed = p[None, :] | eye
    masked_allowed = Mb & global_allowed
    masked = cfg.masked_layers()
    Z = X + w["pos"]
    attn = []
    for l in range(cfg.layers):
        allowed = masked_allowed if l in masked else global_allowed
        h, A = multi_head_attention(
            Z, allowed, w[f"attn{l}.Wq"], w[f"attn{l}.Wk"], w[f"attn{l}.Wv"], w[f"attn{l}.Wo"], cfg.heads
        )
        Z = layer_norm(Z + h, w[f"attn{l}.ln_g"], w[f"attn{l}.ln_b"])
        attn.append(ad.value_of(A))
    return (Z, attn) if return_attention else Z


def encode(X, M, w: EncoderWeights, present=None):
    if w.cfg.variant == "gcn":
        return gcn_forward(X, M, w)
    return attention_forward(X, M, w, present)


def estimate_state(Z, w: EncoderWeights):
    """Base linear velocity (3) and base height from ``Flatten(Z)``."""
    _check_nodes(Z, w.cfg.D)
    flat = Z.reshape(1, -1)
    return _mlp(flat, w, "est", ACTIVATIONS[w.cfg.activation]).reshape(STATE_SIZE)


def _broadcast_rows(v, n_cols):
    """Repeat a vector (plain or dual) across the 32 node rows."""
    ones = np.ones((N_MAX, 1))
    return ones @ v.reshape(1, n_cols)


def decode_actions(Z, P, o_g, w: EncoderWeights, jmap: JointMap | None = None):
    """Per-node decoders on ``[Z[i], P, o_g]``; returns (a_global, a_r)."""
    _check_nodes(Z, w.cfg.D)
    if ad.value_of(P).shape != (STATE_SIZE,):
        raise ShapeMismatch(f"estimated state must have {STATE_SIZE} entries")
    if ad.value_of(o_g).shape != (GLOBAL_OBS,):
        raise ShapeMismatch(f"global observation must have {GLOBAL_OBS} entries")
    H = ad.concatenate([Z, _broadcast_rows(P, STATE_SIZE), _broadcast_rows(o_g, GLOBAL_OBS)], axis=1)
    a = _mlp(H, w, "dec", ACTIVATIONS[w.cfg.activation], per_node=True).reshape(N_MAX)
    if jmap is None:
        return a, None
    return a, unproject(ad.value_of(a), jmap)


def critic_node_values(Zc, privileged, w: EncoderWeights):
    _check_nodes(Zc, w.cfg.D)
    if ad.value_of(privileged).shape != (w.cfg.privileged_dim,):
        raise ShapeMismatch(f"privileged vector must have {w.cfg.privileged_dim} entries")
    H = ad.concatenate([Zc, _broadcast_rows(privileged, w.cfg.privileged_dim)], axis=1)
    return _mlp(H, w, "critic", ACTIVATIONS[w.cfg.activation], per_node=True).reshape(N_MAX)


def critic_value(Zc, privileged, w: EncoderWeights, present=None):
    """Mean of the per-node value estimates over present slots."""
    p = _present(present)
    if not p.any():
        raise ShapeMismatch("critic needs at least one present node")
    v = critic_node_values(Zc, privileged, w)
    return (v * p.astype(float)).sum() / float(p.sum())


def policy_forward(inp: PolicyInput, M, w: EncoderWeights, jmap: JointMap | None = None):
    """Observation to (estimated state, a_global, a_r)."""
    p = inp.I
    X = embed_nodes(inp, w)
    Z = encode(X, M, w, p)
    P = estimate_state(Z, w)
    a, a_r = decode_actions(Z, P, inp.global_obs(), w, jmap)
    return P, a, a_r
