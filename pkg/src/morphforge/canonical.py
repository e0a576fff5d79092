"""Canonical 32-slot joint space, embodiment graph and attention masks.

Every humanoid is embedded into a fixed, semantically ordered joint vector:
legs first (0-11), then waist (12-14), head (15-17) and arms (18-31).
Physical joints are assigned to slots through an explicit alias table, and
the kinematic tree over the assigned joints becomes a directed graph whose
adjacency matrix feeds the encoders.

Alias files are JSON::

    {"aliases": {"left_knee_joint": "Left knee pitch", "l_hip_.*": ...},
     "parallel_groups": [["Left ankle roll", "Left ankle pitch"], ...]}

Keys are tried as exact joint names first, then as full-match regular
expressions in file order. Canonical names match case-insensitively.
"""

from __future__ import annotations

import difflib
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CycleDetected, DisconnectedGraph, DuplicateSlot, LengthMismatch, UnmappedJoint
from .robot_model import RobotTemplate

N_MAX = 32


class GlobalJoint(NamedTuple):
    index: int
    name: str
    axis: tuple


_ROLL, _PITCH, _YAW = (1, 0, 0), (0, 1, 0), (0, 0, 1)
_AXIS = {"roll": _ROLL, "pitch": _PITCH, "yaw": _YAW}
_NAMES = (
    "Left hip roll", "Left hip pitch", "Left hip yaw", "Left knee pitch", "Left ankle roll", "Left ankle pitch",
    "Right hip roll", "Right hip pitch", "Right hip yaw", "Right knee pitch", "Right ankle roll", "Right ankle pitch",
    "Waist pitch", "Waist roll", "Waist yaw",
    "Head roll", "Head pitch", "Head yaw",
    "Left shoulder roll", "Left shoulder pitch", "Left shoulder yaw", "Left elbow pitch",
    "Left wrist roll", "Left wrist pitch", "Left wrist yaw",
    "Right shoulder roll", "Right shoulder pitch", "Right shoulder yaw", "Right elbow pitch",
    "Right wrist roll", "Right wrist pitch", "Right wrist yaw",
)
GLOBAL_JOINTS = tuple(GlobalJoint(i, n, _AXIS[n.rsplit(" ", 1)[1]]) for i, n in enumerate(_NAMES))

LEG_SLOTS = tuple(range(0, 12))
WAIST_SLOTS = (12, 13, 14)
HEAD_SLOTS = (15, 16, 17)
ARM_SLOTS = tuple(range(18, 32))


def _norm(name):
    return " ".join(name.lower().split())


_BY_NAME = {_norm(g.name): g.index for g in GLOBAL_JOINTS}


def slot_index(name) -> int:
    """Canonical slot for a canonical joint name (case-insensitive)."""
    try:
        return _BY_NAME[_norm(name)]
    except KeyError:
        close = difflib.get_close_matches(_norm(name), list(_BY_NAME), n=3)
        raise UnmappedJoint(name, [GLOBAL_JOINTS[_BY_NAME[c]].name for c in close]) from None


def table_checksum(table=GLOBAL_JOINTS) -> str:
    """SHA-256 over ``index,name,ax,ay,az`` lines of the slot table."""
    lines = [f"{g.index},{g.name},{g.axis[0]},{g.axis[1]},{g.axis[2]}" for g in table]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# alias tables and joint maps


@dataclass
class AliasTable:
    aliases: dict = field(default_factory=dict)
    parallel_groups: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, d):
        if "aliases" not in d:
            # bare {physical: canonical} mapping
            return cls(dict(d), [])
        return cls(dict(d["aliases"]), [list(g) for g in d.get("parallel_groups", [])])

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {"aliases": dict(self.aliases), "parallel_groups": [list(g) for g in self.parallel_groups]}

    def lookup(self, joint_name):
        """Canonical name for a physical joint, or None."""
        if joint_name in self.aliases:
            return self.aliases[joint_name]
        for pattern, target in self.aliases.items():
            try:
                if re.fullmatch(pattern, joint_name):
                    return target
            except re.error:
                continue
        return None


@dataclass(frozen=True)
class JointMap:
    """Injective assignment of physical joints to canonical slots.

    ``order`` fixes the physical vector layout: ``q_r[k]`` belongs to the
    joint ``order[k]``.
    """

    order: tuple
    forward: dict
    inverse: dict

    @property
    def n_r(self):
        return len(self.order)

    def slots(self):
        return [self.forward[n] for n in self.order]

    def to_json(self):
        return json.dumps({n: self.forward[n] for n in self.order}, indent=2)


def _as_alias_table(aliases):
    return aliases if isinstance(aliases, AliasTable) else AliasTable.from_dict(aliases)


def build_joint_map(r: RobotTemplate, aliases) -> JointMap:
    """Map every revolute joint of ``r`` to its canonical slot.

    Fixed joints are ignored. A revolute joint without an alias raises
    :class:`UnmappedJoint` with the closest alias keys as suggestions.
    """
    table = _as_alias_table(aliases)
    forward, inverse, order = {}, {}, []
    for j in r.joints:
        if not j.revolute:
            continue
        target = table.lookup(j.name)
        if target is None:
            pool = list(table.aliases) + [g.name for g in GLOBAL_JOINTS]
            raise UnmappedJoint(j.name, difflib.get_close_matches(j.name, pool, n=3, cutoff=0.5))
        slot = slot_index(target)
        if slot in inverse:
            raise DuplicateSlot(f"joints {inverse[slot]!r} and {j.name!r} both map to slot {slot} ({GLOBAL_JOINTS[slot].name})")
        forward[j.name] = slot
        inverse[slot] = j.name
        order.append(j.name)
    return JointMap(tuple(order), forward, inverse)


def project(q_r, jmap: JointMap) -> np.ndarray:
    """Zero-padded embedding of a physical joint vector into 32 slots."""
    q_r = np.asarray(q_r, dtype=float).reshape(-1)
    if q_r.shape[0] != jmap.n_r:
        raise LengthMismatch(f"expected {jmap.n_r} joint values, got {q_r.shape[0]}")
    out = np.zeros(N_MAX)
    if jmap.n_r:
        out[jmap.slots()] = q_r
    return out


def unproject(a_global, jmap: JointMap) -> np.ndarray:
    """Inverse of :func:`project`; values at unmapped slots are dropped."""
    a_global = np.asarray(a_global, dtype=float).reshape(-1)
    if a_global.shape[0] != N_MAX:
        raise LengthMismatch(f"expected {N_MAX} canonical values, got {a_global.shape[0]}")
    return a_global[jmap.slots()].copy() if jmap.n_r else np.zeros(0)


# ---------------------------------------------------------------------------
# embodiment graph


@dataclass
class EmbodimentGraph:
    present: np.ndarray  # (32,) bool
    edges: list  # [(parent_slot, child_slot)], sorted

    @property
    def n_present(self):
        return int(self.present.sum())

    def is_tree(self):
        n = self.n_present
        if n == 0:
            return not self.edges
        if len(self.edges) != n - 1:
            return False
        parent = {}
        for p, c in self.edges:
            if not (self.present[p] and self.present[c]) or c in parent:
                return False
            parent[c] = p
        roots = [i for i in np.flatnonzero(self.present) if i not in parent]
        if len(roots) != 1:
            return False
        for node in parent:
            seen = set()
            while node in parent:
                if node in seen:
                    return False
                seen.add(node)
                node = parent[node]
        return True


def controllability(r: RobotTemplate, jmap: JointMap) -> np.ndarray:
    """Binary 32-vector: 1 where a mapped joint of ``r`` is revolute."""
    flags = np.zeros(N_MAX, dtype=np.int64)
    for name, slot in jmap.forward.items():
        try:
            j = r.joint(name)
        except KeyError:
            continue
        if j.revolute:
            flags[slot] = 1
    return flags


def build_graph(r: RobotTemplate, jmap: JointMap, parallel_groups=None, connect_roots=True) -> EmbodimentGraph:
    """Directed kinematic graph over the present canonical slots.

    A slot is present when its mapped joint is revolute in ``r``. Each
    present joint's parent is its nearest present ancestor joint, so fixed
    or unmapped joints in between are contracted away. Members of a
    parallel-linkage group all hang directly off the joint preceding the
    group. Joints with no present ancestor are roots; with
    ``connect_roots`` every extra root is attached to the lowest-index one,
    otherwise more than one root raises :class:`DisconnectedGraph`.
    """
    present = controllability(r, jmap).astype(bool)
    slot_of = {n: s for n, s in jmap.forward.items() if present[s]}
    by_child = {j.child: j for j in r.joints}

    def nearest_present_ancestor(joint):
        seen = set()
        link = joint.parent
        while link in by_child:
            j = by_child[link]
            if j.name in seen:
                raise CycleDetected(f"kinematic loop through joint {j.name!r}")
            seen.add(j.name)
            if j.name in slot_of:
                return slot_of[j.name]
            link = j.parent
        return None

    parent = {}
    for j in r.joints:
        if j.name in slot_of:
            parent[slot_of[j.name]] = nearest_present_ancestor(j)

    for group in parallel_groups or []:
        members = [slot_index(n) for n in group]
        members = [s for s in members if present[s]]
        if not members:
            continue
        member_set = set(members)
        # the group's preceding joint: first ancestor outside the group
        preceding = None
        for s in members:
            p = parent[s]
            while p is not None and p in member_set:
                p = parent[p]
            if p is not None:
                preceding = p
                break
        for s in members:
            parent[s] = preceding

    roots = sorted(s for s, p in parent.items() if p is None)
    if len(roots) > 1:
        if not connect_roots:
            raise DisconnectedGraph(f"{len(roots)} root joints: {[GLOBAL_JOINTS[s].name for s in roots]}")
        for s in roots[1:]:
            parent[s] = roots[0]

    edges = sorted((p, c) for c, p in parent.items() if p is not None)
    g = EmbodimentGraph(present, edges)
    if not g.is_tree():
        raise CycleDetected("parallel-linkage groups produce a non-tree graph")
    return g


def adjacency(g: EmbodimentGraph) -> np.ndarray:
    """Directed 32x32 binary adjacency, ``A[i, j] = 1`` for edge i -> j."""
    A = np.zeros((N_MAX, N_MAX), dtype=np.int64)
    for p, c in g.edges:
        A[p, c] = 1
    return A


def attention_mask(A, symmetric=True) -> np.ndarray:
    """Structural mask ``I + A``, clipped to {0, 1}.

    With ``symmetric`` (the default) ``A`` is replaced by ``A | A.T`` so
    information flows both ways along each kinematic edge.
    """
    A = np.asarray(A) != 0
    if symmetric:
        A = A | A.T
    return (A | np.eye(A.shape[0], dtype=bool)).astype(np.int64)


# ---------------------------------------------------------------------------
# export


def adjacency_csv(A) -> str:
    buf = io.StringIO()
    for row in np.asarray(A, dtype=np.int64):
        buf.write(",".join(str(int(v)) for v in row) + "\n")
    return buf.getvalue()


def graph_dot(g: EmbodimentGraph, name="embodiment") -> str:
    """DOT rendering; absent slots are drawn dashed and grey."""
    lines = [f'digraph "{name}" {{', "  node [shape=box];"]
    for gj in GLOBAL_JOINTS:
        label = f"{gj.index}: {gj.name}"
        if g.present[gj.index]:
            lines.append(f'  n{gj.index} [label="{label}"];')
        else:
            lines.append(f'  n{gj.index} [label="{label} (absent)", style=dashed, color=grey];')
    for p, c in g.edges:
        lines.append(f"  n{p} -> n{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"
