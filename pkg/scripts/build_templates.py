"""Regenerate the bundled template URDF, its alias table and the test corpus.

The template is a G1-class humanoid (29 body DoF plus a 3-DoF neck) built
from box-shaped links, so every link is physically consistent by
construction. Total mass is pinned to 33 kg.

    python scripts/build_templates.py
"""

import json
import math
import re
from pathlib import Path

import numpy as np

from morphforge.inertia import InertialParams
from morphforge.robot_model import FIXED, REVOLUTE, JointSpec, LinkSpec, RobotTemplate, save_robot

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "morphforge" / "data"
CORPUS = ROOT / "tests" / "fixtures" / "urdf"

TOTAL_MASS = 33.0
X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)


def box_link(name, mass, size, com, rpy=(0.0, 0.0, 0.0), color="0.7 0.7 0.7 1"):
    a, b, c = size
    I_com = mass / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])
    from morphforge.robot_model import rpy_to_matrix

    inert = InertialParams.from_com(mass, com, I_com, rpy_to_matrix(rpy))
    cx, cy, cz = com
    visual = (
        f'<visual><origin xyz="{cx} {cy} {cz}" rpy="{rpy[0]} {rpy[1]} {rpy[2]}" />'
        f'<geometry><box size="{a} {b} {c}" /></geometry>'
        f'<material name="{name}_mat"><color rgba="{color}" /></material></visual>'
    )
    collision = (
        f'<collision><origin xyz="{cx} {cy} {cz}" rpy="{rpy[0]} {rpy[1]} {rpy[2]}" />'
        f'<geometry><box size="{a} {b} {c}" /></geometry></collision>'
    )
    return LinkSpec(name, inert, [visual, collision])


def frame_link(name):
    return LinkSpec(name, InertialParams(0.0, np.zeros(3), np.zeros((3, 3))), [])


def rev(name, parent, child, p, axis, lo, hi, vel, eff, e=(0.0, 0.0, 0.0)):
    return JointSpec(name, parent, child, p, e, axis, lo, hi, vel, eff, REVOLUTE)


def fixed(name, parent, child, p):
    return JointSpec(name, parent, child, p, np.zeros(3), X, 0.0, 0.0, 0.0, 0.0, FIXED)


def leg(side, n_dof=6):
    s = 1.0 if side == "left" else -1.0
    L, J = [], []
    L.append(box_link(f"{side}_hip_pitch_link", 1.35, (0.08, 0.07, 0.09), (0.002, s * 0.046, -0.057), (0.3, 0.0, 0.0)))
    L.append(box_link(f"{side}_hip_roll_link", 1.52, (0.09, 0.08, 0.08), (0.029, s * -0.005, -0.040)))
    L.append(box_link(f"{side}_hip_yaw_link", 1.70, (0.08, 0.09, 0.24), (-0.057, s * -0.010, -0.084), (0.0, 0.35, 0.0)))
    L.append(box_link(f"{side}_knee_link", 1.93, (0.08, 0.08, 0.30), (0.005, s * 0.002, -0.140)))
    J.append(rev(f"{side}_hip_pitch_joint", "pelvis", f"{side}_hip_pitch_link", (0.0, s * 0.0645, -0.1027), Y, -2.53, 2.88, 32.0, 88.0))
    roll_lo, roll_hi = (-0.52, 2.97) if s > 0 else (-2.97, 0.52)
    J.append(rev(f"{side}_hip_roll_joint", f"{side}_hip_pitch_link", f"{side}_hip_roll_link", (0.0, s * 0.052, -0.030), X, roll_lo, roll_hi, 20.0, 139.0))
    J.append(rev(f"{side}_hip_yaw_joint", f"{side}_hip_roll_link", f"{side}_hip_yaw_link", (0.025, 0.0, -0.124), Z, -2.75, 2.75, 32.0, 88.0))
    J.append(rev(f"{side}_knee_joint", f"{side}_hip_yaw_link", f"{side}_knee_link", (-0.078, s * 0.002, -0.177), Y, -0.087, 2.88, 20.0, 139.0))
    if n_dof == 6:
        L.append(box_link(f"{side}_ankle_pitch_link", 0.074, (0.03, 0.03, 0.03), (-0.001, 0.0, -0.011)))
        L.append(box_link(f"{side}_ankle_roll_link", 0.608, (0.22, 0.08, 0.04), (0.026, 0.0, -0.030)))
        J.append(rev(f"{side}_ankle_pitch_joint", f"{side}_knee_link", f"{side}_ankle_pitch_link", (0.0, s * -0.0094, -0.300), Y, -0.87, 0.52, 37.0, 50.0))
        J.append(rev(f"{side}_ankle_roll_joint", f"{side}_ankle_pitch_link", f"{side}_ankle_roll_link", (0.0, 0.0, -0.017), X, -0.26, 0.26, 37.0, 50.0))
    else:
        L.append(box_link(f"{side}_ankle_pitch_link", 0.682, (0.22, 0.08, 0.04), (0.020, 0.0, -0.035)))
        J.append(rev(f"{side}_ankle_pitch_joint", f"{side}_knee_link", f"{side}_ankle_pitch_link", (0.0, s * -0.0094, -0.300), Y, -0.87, 0.52, 37.0, 50.0))
    return L, J


def arm(side, n_dof=7):
    s = 1.0 if side == "left" else -1.0
    names = ["shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow", "wrist_roll", "wrist_pitch", "wrist_yaw"][:n_dof]
    masses = [0.718, 0.643, 0.734, 0.600, 0.085, 0.484, 0.254]
    sizes = [(0.06, 0.06, 0.06), (0.06, 0.05, 0.08), (0.05, 0.05, 0.12), (0.10, 0.05, 0.05), (0.04, 0.04, 0.04), (0.06, 0.05, 0.05), (0.08, 0.04, 0.06)]
    coms = [(0.0, s * 0.035, -0.0), (-0.001, s * 0.003, -0.019), (0.010, s * 0.001, -0.051), (0.064, 0.002, -0.011), (0.017, 0.001, 0.0), (0.023, 0.0, 0.0), (0.050, 0.0, 0.0)]
    offsets = [(0.0039, s * 0.100, 0.237), (0.0, s * 0.038, -0.014), (0.0, s * 0.006, -0.100), (0.016, 0.0, -0.080), (0.100, s * 0.002, -0.010), (0.038, 0.0, 0.0), (0.046, 0.0, 0.0)]
    axes = [Y, X, Z, Y, X, Y, Z]
    limits = [(-3.09, 2.67, 37.0, 25.0), (-1.59, 2.25, 37.0, 25.0), (-2.62, 2.62, 37.0, 25.0), (-1.05, 2.09, 37.0, 25.0), (-1.97, 1.97, 37.0, 25.0), (-1.61, 1.61, 22.0, 5.0), (-1.61, 1.61, 22.0, 5.0)]
    L, J = [], []
    parent = "torso_link"
    for i, nm in enumerate(names):
        link = f"{side}_{nm}_link"
        L.append(box_link(link, masses[i], sizes[i], coms[i]))
        lo, hi, vel, eff = limits[i]
        if nm == "shoulder_roll" and s < 0:
            lo, hi = -hi, -lo
        J.append(rev(f"{side}_{nm}_joint", parent, link, offsets[i], axes[i], lo, hi, vel, eff))
        parent = link
    return L, J


def humanoid(name, arm_dof=7, waist_dof=3, head_dof=3, leg_dof=6, total_mass=TOTAL_MASS):
    links = [box_link("pelvis", 3.813, (0.12, 0.22, 0.12), (0.0, 0.0, -0.076))]
    joints = []
    # massless IMU frame, no geometry
    links.append(frame_link("imu_in_pelvis"))
    joints.append(fixed("imu_in_pelvis_joint", "pelvis", "imu_in_pelvis", (0.04, 0.0, -0.08)))
    for side in ("left", "right"):
        L, J = leg(side, leg_dof)
        links += L
        joints += J

    waist = [("waist_yaw", "waist_yaw_link", Z, (0.0, 0.0, 0.0), 0.214, (-2.62, 2.62, 32.0, 88.0)),
             ("waist_roll", "waist_roll_link", X, (-0.0039635, 0.0, 0.044), 0.086, (-0.52, 0.52, 37.0, 50.0)),
             ("waist_pitch", "torso_link", Y, (0.0, 0.0, 0.0), None, (-0.52, 0.52, 37.0, 50.0))]
    parent = "pelvis"
    for i, (jn, ln, ax, off, mass, lim) in enumerate(waist):
        is_torso = ln == "torso_link"
        if not is_torso:
            if i >= waist_dof:
                continue
            links.append(box_link(ln, mass, (0.05, 0.05, 0.04), (0.0, 0.0, 0.01)))
            joints.append(rev(f"{jn}_joint", parent, ln, off, ax, *lim))
            parent = ln
        else:
            links.append(box_link("torso_link", 1.0, (0.16, 0.26, 0.36), (0.002, 0.0, 0.19), (0.0, 0.05, 0.0)))
            if waist_dof == 3:
                joints.append(rev(f"{jn}_joint", parent, ln, off, ax, *lim))
            else:
                joints.append(fixed("torso_mount_joint", parent, ln, (0.0, 0.0, 0.044)))

    if head_dof:
        head = [("head_yaw", "head_yaw_link", Z, (0.0, 0.0, 0.43)),
                ("head_pitch", "head_pitch_link", Y, (0.0, 0.0, 0.03)),
                ("head_roll", "head_link", X, (0.0, 0.0, 0.0))][:head_dof]
        parent = "torso_link"
        for jn, ln, ax, off in head:
            if ln == "head_link" or jn == head[-1][0]:
                links.append(box_link("head_link" if ln != "head_link" else ln, 0.55, (0.12, 0.12, 0.14), (0.01, 0.0, 0.07)))
                ln = links[-1].name
            elif ln == "head_pitch_link":
                links.append(frame_link(ln))
            else:
                links.append(box_link(ln, 0.08, (0.04, 0.04, 0.04), (0.0, 0.0, 0.01)))
            joints.append(rev(f"{jn}_joint", parent, ln, off, ax, -1.0, 1.0, 10.0, 5.0))
            parent = ln

    if arm_dof:
        for side in ("left", "right"):
            L, J = arm(side, arm_dof)
            links += L
            joints += J

    r = RobotTemplate(name, links, joints, "pelvis")
    torso_mass = total_mass - (r.total_mass() - 1.0)
    if torso_mass >= 1.0:
        torso = r.link("torso_link")
        torso.inertial = box_link("torso_link", torso_mass, (0.16, 0.26, 0.36), (0.002, 0.0, 0.19), (0.0, 0.05, 0.0)).inertial
    else:
        # too light for the limb set: scale every body uniformly
        k = total_mass / r.total_mass()
        for ln in r.links:
            p = ln.inertial
            ln.inertial = InertialParams(k * p.m, k * p.h, k * p.Ibar)
    return r


def pendulum():
    base = box_link("base", 2.0, (0.1, 0.1, 0.1), (0.0, 0.0, 0.0))
    bob = box_link("arm", 0.5, (0.04, 0.04, 0.5), (0.0, 0.02, -0.25), (0.0, 0.0, math.pi / 6))
    j = rev("swing", "base", "arm", (0.0, 0.0, -0.05), Y, -1.57, 1.57, 10.0, 20.0)
    return RobotTemplate("pendulum", [base, bob], [j], "base")


def canonical_aliases(r):
    """Physical joint name -> canonical slot name for the generated humanoids."""
    table = {}
    for j in r.joints:
        if not j.revolute:
            continue
        n = j.name.removesuffix("_joint")
        side = ""
        for sd in ("left_", "right_"):
            if n.startswith(sd):
                side, n = sd, n[len(sd):]
        words = n.replace("_", " ")
        if words == "knee":
            words = "knee pitch"
        if words == "elbow":
            words = "elbow pitch"
        table[j.name] = (side.replace("_", " ") + words).capitalize()
    return table


# Robot roster: (name, arm, waist, leg, mass kg, naming style).
ROSTER = [
    ("booster_k1", 4, 0, 5, 20.0, "short"),
    ("booster_t1", 4, 1, 6, 31.0, "camel"),
    ("fourier_n1", 5, 1, 6, 39.0, "upper"),
    ("unitree_g1_23dof", 5, 1, 6, 33.0, "g1"),
    ("unitree_g1_29dof", 7, 3, 6, 33.0, "g1"),
    ("agibot_x2", 7, 3, 6, 40.0, "short"),
    ("engineai_pm01", 5, 1, 6, 40.0, "camel"),
    ("magicalab_gen1", 7, 2, 6, 66.0, "indexed"),
    ("tiangong_1", 4, 0, 6, 42.0, "upper"),
    ("tiangong_2", 4, 0, 6, 61.0, "indexed"),
    ("dobot_atom", 7, 1, 6, 60.0, "short"),
    ("unitree_h1_2", 7, 1, 6, 66.0, "g1"),
    ("leju_kuavo", 7, 0, 6, 52.0, "indexed"),
]


def _split(name):
    """('left', 'hip_pitch') style split of a generated joint name."""
    n = name.removesuffix("_joint")
    for side in ("left", "right"):
        if n.startswith(side + "_"):
            return side, n[len(side) + 1:]
    return "", n


def restyle(r, style):
    """Rename revolute joints to a vendor-like convention.

    Returns the renamed robot and its alias table (keys may be regexes).
    """
    canon = canonical_aliases(r)
    rename, aliases = {}, {}
    counters = {}
    for j in r.joints:
        if not j.revolute:
            continue
        side, part = _split(j.name)
        target = canon[j.name]
        if style == "g1":
            new, key = j.name, j.name
        elif style == "short":
            new = f"{side[:1]}_{part}" if side else part
            key = re.escape(new) + "(_joint)?"
        elif style == "camel":
            body = "".join(w.capitalize() for w in part.split("_"))
            new = f"{side[:1].upper()}_{body}" if side else f"J_{body}"
            key = new
        elif style == "upper":
            new = j.name.upper()
            key = "(?i)" + re.escape(j.name)
        elif style == "indexed":
            chain = "waist" if part.startswith("waist") else ("leg" if part.split("_")[0] in ("hip", "knee", "ankle") else "zarm")
            tag = f"{chain}_{side[:1]}" if side else chain
            counters[tag] = counters.get(tag, 0) + 1
            new = f"{tag}{counters[tag]}_joint"
            key = new
        else:
            raise ValueError(style)
        rename[j.name] = new
        aliases[key] = target
    for j in r.joints:
        j.name = rename.get(j.name, j.name)
    return r, aliases


def roster():
    out = []
    for name, arm_dof, waist_dof, leg_dof, mass, style in ROSTER:
        r = humanoid(name, arm_dof=arm_dof, waist_dof=waist_dof, head_dof=0, leg_dof=leg_dof, total_mass=mass)
        r, aliases = restyle(r, style)
        groups = PARALLEL if leg_dof == 6 else []
        out.append((r, {"aliases": aliases, "parallel_groups": groups}))
    return out


PARALLEL = [["Left ankle roll", "Left ankle pitch"], ["Right ankle roll", "Right ankle pitch"]]


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    CORPUS.mkdir(parents=True, exist_ok=True)
    template = humanoid("g1_32dof")
    save_robot(template, DATA / "template.urdf")
    parallel = [["Left ankle roll", "Left ankle pitch"], ["Right ankle roll", "Right ankle pitch"]]
    with open(DATA / "template_aliases.json", "w", encoding="utf-8") as fh:
        json.dump({"aliases": canonical_aliases(template), "parallel_groups": parallel}, fh, indent=2)
        fh.write("\n")

    biped = humanoid("biped_12dof", arm_dof=0, waist_dof=0, head_dof=0)
    g1_23 = humanoid("g1_23dof", arm_dof=5, waist_dof=1, head_dof=0)
    k1 = humanoid("small_biped_18dof", arm_dof=4, waist_dof=0, head_dof=0, leg_dof=5)
    for r in (template, biped, g1_23, k1, pendulum()):
        save_robot(r, CORPUS / f"{r.name}.urdf")
    for r in (biped, g1_23, k1):
        with open(CORPUS / f"{r.name}_aliases.json", "w", encoding="utf-8") as fh:
            json.dump({"aliases": canonical_aliases(r), "parallel_groups": parallel if r.name != "small_biped_18dof" else []}, fh, indent=2)
            fh.write("\n")
    roster_dir = ROOT / "tests" / "fixtures" / "roster"
    roster_dir.mkdir(parents=True, exist_ok=True)
    for r, table in roster():
        save_robot(r, roster_dir / f"{r.name}.urdf")
        with open(roster_dir / f"{r.name}_aliases.json", "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2)
            fh.write("\n")
        print(r.name, "n_d", r.n_d, "mass", round(r.total_mass(), 6))
    for r in (template, biped, g1_23, k1):
        print(r.name, "n_d", r.n_d, "n_b", r.n_b, "mass", round(r.total_mass(), 6))


if __name__ == "__main__":
    main()
