"""URDF <-> template parameter conversion.

Only ``link``, ``joint``, ``inertial``, ``origin``, ``axis`` and ``limit`` are
interpreted. Everything else (visual, collision, materials, vendor
extensions) is kept as opaque XML and written back unchanged.

Link inertia is stored in the origin frame: URDF states it about the CoM in
a possibly rotated frame, so parsing applies the rotation and the parallel
axis theorem, and serialization undoes it with an identity inertia-frame
rotation.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CyclicTree,
    DanglingReference,
    InconsistentLink,
    MalformedDocument,
    MissingInertia,
)
from .inertia import InertialParams, check_consistency

REVOLUTE = "revolute"
FIXED = "fixed"

_GEOMETRY_TAGS = ("visual", "collision")


def fmt(x):
    """17 significant digits: enough for an exact float64 round trip."""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".17g")


def rpy_to_matrix(rpy):
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass
class LinkSpec:
    name: str
    inertial: InertialParams
    passthrough: list = field(default_factory=list)

    @property
    def massless(self):
        return self.inertial.m == 0.0

    @property
    def has_geometry(self):
        return any(s.lstrip().startswith(tuple(f"<{t}" for t in _GEOMETRY_TAGS)) for s in self.passthrough)

    def copy(self):
        return LinkSpec(self.name, self.inertial.copy(), list(self.passthrough))


@dataclass
class JointSpec:
    name: str
    parent: str
    child: str
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    a: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    q_min: float = 0.0
    q_max: float = 0.0
    qdot_max: float = 0.0
    tau_max: float = 0.0
    actuation: str = REVOLUTE
    passthrough: list = field(default_factory=list)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.e = np.asarray(self.e, dtype=float).reshape(3)
        self.a = np.asarray(self.a, dtype=float).reshape(3)

    @property
    def revolute(self):
        return self.actuation == REVOLUTE

    def to_vector(self):
        return np.concatenate(
            [self.p, self.e, self.a, [self.q_min, self.q_max, self.qdot_max, self.tau_max]]
        )

    def copy(self):
        return JointSpec(
            self.name, self.parent, self.child, self.p.copy(), self.e.copy(), self.a.copy(),
            self.q_min, self.q_max, self.qdot_max, self.tau_max, self.actuation, list(self.passthrough),
        )


@dataclass
class RobotTemplate:
    name: str
    links: list
    joints: list
    root: str
    passthrough: list = field(default_factory=list)

    @property
    def n_b(self):
        return len(self.links)

    @property
    def n_d(self):
        return sum(1 for j in self.joints if j.revolute)

    def link(self, name) -> LinkSpec:
        for ln in self.links:
            if ln.name == name:
                return ln
        raise KeyError(name)

    def joint(self, name) -> JointSpec:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    def joint_names(self, revolute_only=False):
        return [j.name for j in self.joints if j.revolute or not revolute_only]

    def parent_joint(self, link_name):
        """The joint whose child is ``link_name`` (None for the root)."""
        for j in self.joints:
            if j.child == link_name:
                return j
        return None

    def child_joints(self, link_name):
        return [j for j in self.joints if j.parent == link_name]

    def total_mass(self):
        return float(sum(ln.inertial.m for ln in self.links))

    def copy(self):
        return RobotTemplate(
            self.name,
            [ln.copy() for ln in self.links],
            [j.copy() for j in self.joints],
            self.root,
            list(self.passthrough),
        )


def _floats(text, n, what):
    try:
        vals = [float(v) for v in (text or "").split()]
    except ValueError:
        raise MalformedDocument(f"non-numeric {what}: {text!r}") from None
    if len(vals) != n:
        raise MalformedDocument(f"{what} needs {n} numbers, got {text!r}")
    return np.array(vals)


def _origin(elem):
    o = elem.find("origin")
    if o is None:
        return np.zeros(3), np.zeros(3)
    xyz = _floats(o.get("xyz", "0 0 0"), 3, "origin xyz")
    rpy = _floats(o.get("rpy", "0 0 0"), 3, "origin rpy")
    return xyz, rpy


def _attr_float(elem, key, default=0.0):
    if elem is None or elem.get(key) is None:
        return default
    try:
        return float(elem.get(key))
    except ValueError:
        raise MalformedDocument(f"attribute {key}={elem.get(key)!r} is not a number") from None


def _opaque(elem):
    e = ET.fromstring(ET.tostring(elem, encoding="unicode"))
    e.tail = None
    return ET.tostring(e, encoding="unicode")


def _parse_link(el):
    name = el.get("name")
    if not name:
        raise MalformedDocument("link without a name")
    passthrough = [_opaque(c) for c in el if c.tag != "inertial"]
    inert = el.find("inertial")
    if inert is None:
        if any(el.find(t) is not None for t in _GEOMETRY_TAGS):
            raise MissingInertia(f"link {name!r} has geometry but no <inertial> block")
        return LinkSpec(name, InertialParams(0.0, np.zeros(3), np.zeros((3, 3))), passthrough)

    xyz, rpy = _origin(inert)
    mass_el = inert.find("mass")
    if mass_el is None:
        raise MissingInertia(f"link {name!r} has an <inertial> block without <mass>")
    m = _attr_float(mass_el, "value")
    ie = inert.find("inertia")
    keys = ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")
    ixx, ixy, ixz, iyy, iyz, izz = (_attr_float(ie, k) for k in keys)
    I_com = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
    return LinkSpec(name, InertialParams.from_com(m, xyz, I_com, rpy_to_matrix(rpy)), passthrough)


def _parse_joint(el):
    name = el.get("name")
    jtype = el.get("type")
    if not name:
        raise MalformedDocument("joint without a name")
    if jtype not in (REVOLUTE, FIXED):
        raise MalformedDocument(f"joint {name!r}: unsupported type {jtype!r}")
    parent = el.find("parent")
    child = el.find("child")
    if parent is None or child is None or not parent.get("link") or not child.get("link"):
        raise MalformedDocument(f"joint {name!r} needs <parent link> and <child link>")
    p, e = _origin(el)
    axis_el = el.find("axis")
    a = _floats(axis_el.get("xyz"), 3, "axis xyz") if axis_el is not None else np.array([1.0, 0.0, 0.0])
    norm = np.linalg.norm(a)
    if jtype == REVOLUTE:
        if abs(norm - 1.0) > 1e-6:
            raise MalformedDocument(f"joint {name!r}: axis {a} is not a unit vector")
        a = a / norm
    lim = el.find("limit")
    q_min = _attr_float(lim, "lower")
    q_max = _attr_float(lim, "upper")
    if q_min > q_max:
        raise MalformedDocument(f"joint {name!r}: lower limit exceeds upper limit")
    passthrough = [
        _opaque(c) for c in el if c.tag not in ("parent", "child", "origin", "axis", "limit")
    ]
    return JointSpec(
        name, parent.get("link"), child.get("link"), p, e, a,
        q_min, q_max, _attr_float(lim, "velocity"), _attr_float(lim, "effort"),
        jtype, passthrough,
    )


def _validate_tree(links, joints):
    names = [ln.name for ln in links]
    if len(set(names)) != len(names):
        raise MalformedDocument("duplicate link names")
    jnames = [j.name for j in joints]
    if len(set(jnames)) != len(jnames):
        raise MalformedDocument("duplicate joint names")
    known = set(names)
    parent_of = {}
    for j in joints:
        for ref in (j.parent, j.child):
            if ref not in known:
                raise DanglingReference(f"joint {j.name!r} references missing link {ref!r}")
        if j.child in parent_of:
            raise CyclicTree(f"link {j.child!r} has more than one parent joint")
        parent_of[j.child] = j.parent
    roots = [n for n in names if n not in parent_of]
    if not names:
        return None
    if not roots:
        raise CyclicTree("every link has a parent: the joint graph contains a cycle")
    # walking up from any link must terminate at a root
    for n in names:
        seen = set()
        cur = n
        while cur in parent_of:
            if cur in seen:
                raise CyclicTree(f"cycle through link {cur!r}")
            seen.add(cur)
            cur = parent_of[cur]
    if len(roots) > 1:
        raise MalformedDocument(f"links do not form a single tree; roots: {roots}")
    return roots[0]


def parse_robot(text) -> RobotTemplate:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedDocument(f"XML error: {exc.msg}", position=exc.position) from None
    if root.tag != "robot":
        raise MalformedDocument(f"root element must be <robot>, got <{root.tag}>")
    links, joints, extra = [], [], []
    for el in root:
        if not isinstance(el.tag, str):
            continue  # comments / processing instructions
        if el.tag == "link":
            links.append(_parse_link(el))
        elif el.tag == "joint":
            joints.append(_parse_joint(el))
        else:
            extra.append(_opaque(el))
    root_link = _validate_tree(links, joints)
    return RobotTemplate(root.get("name", "robot"), links, joints, root_link, extra)


def load_robot(path) -> RobotTemplate:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_robot(fh.read())


def _sub(parent, tag, **attrs):
    return ET.SubElement(parent, tag, {k: v for k, v in attrs.items()})


def _vec(v):
    return " ".join(fmt(x) for x in v)


def _emit_link(robot_el, link: LinkSpec):
    el = _sub(robot_el, "link", name=link.name)
    p = link.inertial
    if not (link.massless and not np.any(p.h) and not np.any(p.Ibar) and not link.has_geometry):
        inert = _sub(el, "inertial")
        if p.m > 0.0:
            c = p.h / p.m
            I_com = p.com_inertia()
        else:
            c = np.zeros(3)
            I_com = p.Ibar
        _sub(inert, "origin", xyz=_vec(c), rpy="0 0 0")
        _sub(inert, "mass", value=fmt(p.m))
        _sub(
            inert, "inertia",
            ixx=fmt(I_com[0, 0]), ixy=fmt(I_com[0, 1]), ixz=fmt(I_com[0, 2]),
            iyy=fmt(I_com[1, 1]), iyz=fmt(I_com[1, 2]), izz=fmt(I_com[2, 2]),
        )
    for s in link.passthrough:
        el.append(ET.fromstring(s))


def _emit_joint(robot_el, j: JointSpec):
    el = _sub(robot_el, "joint", name=j.name, type=j.actuation)
    _sub(el, "origin", xyz=_vec(j.p), rpy=_vec(j.e))
    _sub(el, "parent", link=j.parent)
    _sub(el, "child", link=j.child)
    _sub(el, "axis", xyz=_vec(j.a))
    _sub(
        el, "limit",
        lower=fmt(j.q_min), upper=fmt(j.q_max), effort=fmt(j.tau_max), velocity=fmt(j.qdot_max),
    )
    for s in j.passthrough:
        el.append(ET.fromstring(s))


def link_is_consistent(link: LinkSpec):
    """Massless frame links are exempt; everything else must be physical."""
    p = link.inertial
    if p.m == 0.0:
        return not np.any(p.h) and not np.any(p.Ibar)
    return check_consistency(p).consistent


def serialize_robot(r: RobotTemplate) -> str:
    for link in r.links:
        if not link_is_consistent(link):
            raise InconsistentLink(f"link {link.name!r} is not physically consistent", link=link.name)
    robot_el = ET.Element("robot", name=r.name)
    for link in r.links:
        _emit_link(robot_el, link)
    for j in r.joints:
        _emit_joint(robot_el, j)
    for s in r.passthrough:
        robot_el.append(ET.fromstring(s))
    ET.indent(robot_el, space="  ")
    return '<?xml version="1.0" encoding="utf-8"?>\n' + ET.tostring(robot_el, encoding="unicode") + "\n"


def save_robot(r: RobotTemplate, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_robot(r))


def template_vector(r: RobotTemplate) -> np.ndarray:
    """kappa = [per-link 10-vectors, per-revolute-joint 13-vectors]."""
    parts = [ln.inertial.to_vector() for ln in r.links]
    parts += [j.to_vector() for j in r.joints if j.revolute]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)
