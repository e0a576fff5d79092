import math
from pathlib import Path

import numpy as np
import pytest

from morphforge.errors import (
    CyclicTree,
    DanglingReference,
    InconsistentLink,
    MalformedDocument,
    MissingInertia,
)
from morphforge.inertia import InertialParams, principal_moments
from morphforge.robot_model import (
    RobotTemplate,
    load_robot,
    parse_robot,
    serialize_robot,
    template_vector,
)

from .oracles import mc_second_moments

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = sorted((FIXTURES / "urdf").glob("*.urdf"))

PENDULUM = """<?xml version="1.0"?>
<robot name="pendulum">
  <link name="base">
    <inertial>
      <origin xyz="0 0 0"/>
      <mass value="2"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
    </inertial>
  </link>
  <link name="arm">
    <inertial>
      <origin xyz="0 0.02 -0.25" rpy="0 0 0"/>
      <mass value="0.5"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.001"/>
    </inertial>
    <visual><geometry><box size="0.1 0.1 0.5"/></geometry></visual>
  </link>
  <joint name="swing" type="revolute">
    <origin xyz="0 0 -0.05" rpy="0 0 0"/>
    <parent link="base"/>
    <child link="arm"/>
    <axis xyz="0 1 0"/>
    <limit lower="-1.57" upper="1.57" effort="20" velocity="10"/>
  </joint>
  <gazebo reference="arm"><mu1>0.9</mu1></gazebo>
</robot>
"""


def _assert_same_robot(a: RobotTemplate, b: RobotTemplate, tol=1e-9):
    assert [ln.name for ln in a.links] == [ln.name for ln in b.links]
    assert [j.name for j in a.joints] == [j.name for j in b.joints]
    assert a.root == b.root
    for la, lb in zip(a.links, b.links):
        np.testing.assert_allclose(la.inertial.to_vector(), lb.inertial.to_vector(), atol=tol, rtol=0)
    for ja, jb in zip(a.joints, b.joints):
        assert (ja.parent, ja.child, ja.actuation) == (jb.parent, jb.child, jb.actuation)
        np.testing.assert_allclose(ja.to_vector(), jb.to_vector(), atol=tol, rtol=0)


class TestParse:
    def test_pendulum(self):
        r = parse_robot(PENDULUM)
        assert (r.n_b, r.n_d, r.root) == (2, 1, "base")
        arm = r.link("arm").inertial
        # hand parallel-axis: Ibar = I_com + m (|c|^2 I - c c^T)
        expected = np.array([[0.04145, 0.0, 0.0], [0.0, 0.04125, 0.0025], [0.0, 0.0025, 0.0012]])
        np.testing.assert_allclose(arm.Ibar, expected, atol=1e-15)
        np.testing.assert_allclose(arm.h, [0.0, 0.01, -0.125])

    def test_pendulum_monte_carlo(self):
        # box with the same CoM-frame inertia: a^2 = b^2 = 0.012, c^2 = 0.228
        rng = np.random.default_rng(0)
        half = 0.5 * np.sqrt([0.012, 0.012, 0.228])
        pts = rng.uniform(-half, half, size=(2_000_000, 3)) + np.array([0.0, 0.02, -0.25])
        mc = mc_second_moments(pts, mass=0.5)
        arm = parse_robot(PENDULUM).link("arm").inertial
        assert np.linalg.norm(mc - arm.Ibar) / np.linalg.norm(arm.Ibar) < 2e-3

    def test_rotated_inertia_frame(self):
        doc = PENDULUM.replace('xyz="0 0.02 -0.25" rpy="0 0 0"', f'xyz="0 0 0" rpy="0 0 {math.pi / 2}"')
        doc = doc.replace('ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.001"', 'ixx="1" ixy="0" ixz="0" iyy="2" iyz="0" izz="3"')
        arm = parse_robot(doc).link("arm").inertial
        np.testing.assert_allclose(arm.Ibar, np.diag([2.0, 1.0, 3.0]), atol=1e-12)

    def test_passthrough_kept(self):
        r = parse_robot(PENDULUM)
        assert any("<visual" in s for s in r.link("arm").passthrough)
        assert any("gazebo" in s for s in r.passthrough)
        out = serialize_robot(r)
        assert "<mu1>0.9</mu1>" in out and '<box size="0.1 0.1 0.5"' in out

    def test_dangling(self):
        with pytest.raises(DanglingReference):
            parse_robot(PENDULUM.replace('<child link="arm"/>', '<child link="ghost"/>'))

    def test_malformed_position(self):
        with pytest.raises(MalformedDocument) as ei:
            parse_robot("<robot>\n<link name='a'>\n</robot>")
        assert ei.value.position is not None and ei.value.position[0] == 3

    def test_cycle(self):
        doc = PENDULUM.replace(
            "</robot>",
            '<joint name="back" type="fixed"><parent link="arm"/><child link="base"/></joint></robot>',
        )
        with pytest.raises(CyclicTree):
            parse_robot(doc)

    def test_missing_inertia(self):
        doc = """<robot name="x"><link name="a"><visual><geometry><box size="1 1 1"/></geometry></visual></link></robot>"""
        with pytest.raises(MissingInertia):
            parse_robot(doc)

    def test_dummy_link_exempt(self):
        r = parse_robot('<robot name="x"><link name="world"/></robot>')
        assert r.links[0].inertial.m == 0.0

    def test_rotation_translation_invariance_of_moments(self):
        for path in CORPUS:
            r = load_robot(path)
            for ln in r.links:
                if ln.massless:
                    continue
                assert np.allclose(ln.inertial.Ibar, ln.inertial.Ibar.T, atol=1e-15)
                D = principal_moments(ln.inertial).D
                # re-express about a shifted origin: moments unchanged
                p = ln.inertial
                shifted = InertialParams.from_com(p.m, p.com + 0.3, p.com_inertia())
                np.testing.assert_allclose(principal_moments(shifted).D, D, atol=1e-9)


class TestSerialize:
    @pytest.mark.parametrize("path", CORPUS, ids=[p.stem for p in CORPUS])
    def test_round_trip_fixed_point(self, path):
        r1 = load_robot(path)
        r2 = parse_robot(serialize_robot(r1))
        _assert_same_robot(r1, r2)
        assert serialize_robot(r2) == serialize_robot(r1)

    def test_rejects_point_mass(self):
        r = parse_robot(PENDULUM)
        r.link("arm").inertial = InertialParams(2.0, [2.0, 0.0, 0.0], np.diag([0.0, 2.0, 2.0]))
        with pytest.raises(InconsistentLink) as ei:
            serialize_robot(r)
        assert ei.value.link == "arm"

    def test_identity_inertia_frame(self):
        out = serialize_robot(parse_robot(PENDULUM))
        r = parse_robot(out)
        assert 'rpy="0 0 0"' in out
        _assert_same_robot(parse_robot(PENDULUM), r)


class TestTemplateVector:
    def test_pendulum_length(self):
        r = parse_robot(PENDULUM)
        v = template_vector(r)
        assert v.shape == (33,)
        np.testing.assert_array_equal(v[:10], r.links[0].inertial.to_vector())
        np.testing.assert_allclose(v[20:33], [0, 0, -0.05, 0, 0, 0, 0, 1, 0, -1.57, 1.57, 10, 20])

    def test_empty(self):
        assert template_vector(RobotTemplate("e", [], [], None)).shape == (0,)

    def test_bundled_template(self):
        from morphforge.data import template_path

        r = load_robot(template_path())
        assert r.n_d == 32
        assert template_vector(r).shape == (10 * r.n_b + 13 * 32,)
