"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line through the ``criterion`` fixture;
the lines are repeated in the terminal summary.
"""

import hashlib
import math
import time
from pathlib import Path

import numpy as np

from morphforge.canonical import (
    N_MAX,
    AliasTable,
    EmbodimentGraph,
    adjacency,
    attention_mask,
    build_graph,
    build_joint_map,
    controllability,
    project,
    unproject,
)
from morphforge import autodiff as ad
from morphforge.cli import main
from morphforge.data import aliases_path, template_path
from morphforge.encoder import (
    CommandVector,
    EncoderConfig,
    attention_forward,
    decode_actions,
    encode,
    estimate_state,
    gcn_forward,
    init_weights,
)
from morphforge.inertia import (
    InertialParams,
    ThetaInert,
    build_U,
    check_consistency,
    perturb,
    pseudo_from_params,
    theta_from_U,
    upper_cholesky,
)
from morphforge.randomizer import (
    DEFAULT_LINK_RANGES,
    RandomizationConfig,
    apply_locks,
    generate_batch,
    make_rng,
    randomize_joints,
    randomize_links,
    sample_actuation,
    sample_theta,
)
from morphforge.rewards import StateSnapshot, evaluate_rewards
from morphforge.robot_model import load_robot, parse_robot, serialize_robot

from .oracles import brute_force_is_tree, central_difference_jacobian, mc_pseudo_inertia_chunked
from .test_encoder import hop_distance

FIXTURES = Path(__file__).parent / "fixtures"
MC_SAMPLES = 10_000_000

# sha256 over the sorted (relative path, bytes) pairs of a `randomize` run with
# --seed 2024 --count 8; pinned so another platform can compare against it
RANDOMIZE_DIGEST = "5c4f00b35a279cc99b893166239fcc3ca5eaa3d70aa8b85645b4ef11dd3d9ed4"


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def rel_err(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def template():
    return load_robot(template_path())


def test_01_manifold_closure(criterion):
    r = template()
    cfg = RandomizationConfig()
    rng = make_rng(1)
    n_links, n_ok = 0, 0
    t0 = time.perf_counter()
    while n_links < 10_000:
        out, applied = randomize_links(r, cfg, rng)
        for name in applied:
            n_links += 1
            n_ok += check_consistency(out.link(name).inertial).consistent
    dt = time.perf_counter() - t0
    criterion(1, n_ok == n_links and dt < 10.0, f"{n_ok}/{n_links} links consistent in {dt:.2f} s (limit 10 s)")


def test_02_bijection(criterion):
    rng = make_rng(2)
    groups = list(DEFAULT_LINK_RANGES)
    worst_theta, worst_chol = 0.0, 0.0
    base = InertialParams.from_com(2.0, [0.05, -0.02, 0.1], np.diag([0.02, 0.03, 0.04]))
    J0 = pseudo_from_params(base)
    for i in range(1000):
        group = groups[i % len(groups)]
        theta = sample_theta(group, DEFAULT_LINK_RANGES, rng, char_length=(0.1, 0.1, 0.1))
        back = theta_from_U(build_U(theta))
        worst_theta = max(worst_theta, float(np.max(np.abs(back.as_array() - theta.as_array()))))
        J = perturb(J0, theta)
        U = upper_cholesky(J)
        worst_chol = max(worst_chol, rel_fro(U @ U.T, J))
    ok = worst_theta <= 1e-12 and worst_chol <= 1e-10
    criterion(2, ok, f"max |theta - theta(U(theta))| = {worst_theta:.2e} (<= 1e-12), "
                     f"max Cholesky rel. error = {worst_chol:.2e} (<= 1e-10)")


def test_03_analytic_oracles(criterion):
    rng = np.random.default_rng(3)
    cube = InertialParams(1.0, np.zeros(3), np.diag([1 / 6] * 3))
    J_cube = pseudo_from_params(cube)
    want_cube = np.diag([1 / 12, 1 / 12, 1 / 12, 1.0])
    e_cube = float(np.max(np.abs(J_cube - want_cube)))

    J_str = perturb(J_cube, ThetaInert(d1=math.log(2)))
    want_str = np.diag([1 / 3, 1 / 12, 1 / 12, 1.0])
    e_str = float(np.max(np.abs(J_str - want_str)))

    alpha = 0.37
    e_mass = 0.0
    for _ in range(200):
        m = rng.uniform(0.1, 10)
        p = InertialParams.from_com(m, rng.uniform(-0.2, 0.2, 3), m * np.diag(rng.uniform(0.01, 0.02, 3)))
        Jp = perturb(pseudo_from_params(p), ThetaInert(alpha=alpha))
        e_mass = max(e_mass, abs(Jp[3, 3] - math.exp(2 * alpha) * m) / m)
    J_alpha = perturb(J_cube, ThetaInert(alpha=alpha))

    def cube_sampler(k):
        return rng.uniform(-0.5, 0.5, size=(k, 3))

    def stretched_sampler(k):
        return np.column_stack([rng.uniform(-1.0, 1.0, k), rng.uniform(-0.5, 0.5, (k, 2))])

    mc_cube = rel_fro(mc_pseudo_inertia_chunked(cube_sampler, MC_SAMPLES), want_cube)
    mc_str = rel_fro(mc_pseudo_inertia_chunked(stretched_sampler, MC_SAMPLES), want_str)
    # density scaled by e^{2 alpha} over the unchanged volume
    mc_alpha = rel_fro(mc_pseudo_inertia_chunked(cube_sampler, MC_SAMPLES, mass=math.exp(2 * alpha)), J_alpha)

    ok = e_cube <= 1e-12 and e_str <= 1e-12 and e_mass <= 1e-10 and max(mc_cube, mc_str, mc_alpha) <= 1e-3
    criterion(3, ok, f"cube {e_cube:.1e}, stretch {e_str:.1e}, mass law {e_mass:.1e}; "
                     f"Monte-Carlo rel. errors {mc_cube:.1e} / {mc_str:.1e} / {mc_alpha:.1e} (<= 1e-3)")


def test_04_dof_envelope(criterion):
    r = template()
    cfg = RandomizationConfig()
    aliases = AliasTable.load(aliases_path())
    legs = cfg.leg_joints(r)
    jm_full = build_joint_map(r, aliases)
    leg_slots = [jm_full.forward[n] for n in legs]
    rng = make_rng(4)
    counts = []
    legs_ok = True
    for _ in range(10_000):
        locked = sample_actuation(r, cfg, rng)
        counts.append(r.n_d - len(locked))
        legs_ok &= not (locked & legs)
        if len(counts) % 10 == 0:  # the full mask pipeline on every tenth draw keeps this fast
            I = controllability(apply_locks(r, locked), jm_full)
            legs_ok &= bool(np.all(I[leg_slots] == 1)) and int(I.sum()) == counts[-1]
    lo, hi = min(counts), max(counts)
    ok = lo == 12 and hi == 32 and legs_ok
    criterion(4, ok, f"active joints in [{lo}, {hi}] over 10000 draws, "
                     f"12 hit {counts.count(12)}x, 32 hit {counts.count(32)}x, legs always active: {legs_ok}")


def test_05_zero_sum_hip_offsets(criterion):
    r = template()
    cfg = RandomizationConfig()
    rng = make_rng(5)
    worst_sum, worst_abs, worst_applied = 0.0, 0.0, 0.0
    for _ in range(10_000):
        out, _, offsets = randomize_joints(r, cfg, rng)
        for first, d in offsets.items():
            d = np.asarray(d)
            worst_sum = max(worst_sum, abs(float(d.sum())))
            worst_abs = max(worst_abs, float(np.max(np.abs(d))))
            worst_applied = max(worst_applied, float(np.max(np.abs(out.joint(first).e - r.joint(first).e - d))))
    ok = worst_sum <= 1e-12 and worst_abs <= 0.3 and worst_applied <= 1e-15
    criterion(5, ok, f"max |sum| = {worst_sum:.1e} (<= 1e-12), max |offset| = {worst_abs:.4f} rad (<= 0.3)")


def test_06_representation(criterion):
    roster = sorted((FIXTURES / "roster").glob("*.urdf"))
    round_trips = 0
    for path in roster:
        r = load_robot(path)
        table = AliasTable.load(path.with_name(path.stem + "_aliases.json"))
        jm = build_joint_map(r, table)
        q = np.random.default_rng(6).normal(size=jm.n_r)
        round_trips += bool(np.array_equal(unproject(project(q, jm), jm), q)) and jm.n_r == r.n_d

    r = template()
    aliases = AliasTable.load(aliases_path())
    trees = 0
    samples = generate_batch(r, RandomizationConfig(seed=6), 1000)
    for s in samples:
        g = build_graph(s.robot, build_joint_map(s.robot, aliases), aliases.parallel_groups)
        trees += g.is_tree() and brute_force_is_tree(g.n_present, g.edges)
    ok = len(roster) >= 12 and round_trips == len(roster) and trees == len(samples)
    criterion(6, ok, f"{round_trips}/{len(roster)} roster round trips exact, "
                     f"{trees}/{len(samples)} randomized graphs are trees")


def test_07_masking(criterion):
    r = template()
    aliases = AliasTable.load(aliases_path())
    M_tpl = attention_mask(adjacency(build_graph(r, build_joint_map(r, aliases), aliases.parallel_groups)))
    present = np.ones(N_MAX, dtype=bool)
    M_chain = attention_mask(adjacency(EmbodimentGraph(present, [(i, i + 1) for i in range(N_MAX - 1)])))
    rng = np.random.default_rng(7)

    leak = 0.0
    for order in ("masked-first", "global-first"):
        cfg = EncoderConfig(D=8, layers=3, heads=2, hybrid_order=order)
        w = init_weights(cfg, 7)
        for M in (M_tpl, M_chain):
            _, attn = attention_forward(3 * rng.normal(size=(32, 8)), M, w, return_attention=True)
            for l in cfg.masked_layers():
                leak = max(leak, float(np.max(np.abs(attn[l][:, M == 0]))))

    X = rng.normal(size=(32, 8))
    ones = np.ones((32, 32))
    w1 = init_weights(EncoderConfig(D=8, layers=2, heads=2), 3)
    w2 = init_weights(EncoderConfig(D=8, layers=2, heads=2, hybrid_order="global-first"), 3)
    equiv = float(np.max(np.abs(attention_forward(X, ones, w1) - attention_forward(X, ones, w2))))

    khop_ok = True
    for M in (M_chain, M_tpl):
        hops = hop_distance(M)
        for layers in (1, 2, 3, 4):
            w = init_weights(EncoderConfig(D=8, layers=layers, variant="gcn"), layers)
            Z0 = gcn_forward(X, M, w)
            for src in (0, 3, 12, 21, 31):
                Xp = X.copy()
                Xp[src] += rng.normal(size=8)
                moved = np.any(gcn_forward(Xp, M, w) != Z0, axis=1)
                khop_ok &= bool(np.array_equal(moved, hops[src] <= layers))
    ok = leak == 0.0 and equiv <= 1e-12 and khop_ok
    criterion(7, ok, f"max weight outside mask = {leak!r}, full-mask difference = {equiv:.1e} (<= 1e-12), "
                     f"GCN k-hop exact on chain and template: {khop_ok}")


def test_08_gradient_check(criterion):
    present = np.zeros(32, dtype=bool)
    present[:6] = True
    g = EmbodimentGraph(present, [(1, 0), (0, 2), (2, 3), (3, 4), (3, 5)])
    M = attention_mask(adjacency(g))
    worst = 0.0
    for variant in ("transformer", "gcn"):
        for order in ("masked-first", "global-first"):
            w = init_weights(EncoderConfig(D=4, layers=2, heads=2, variant=variant, hybrid_order=order), 8)
            rng = np.random.default_rng(8)
            X0 = rng.normal(size=(32, 4))
            og = rng.normal(size=18)

            def pipeline(x):
                X = ad.concatenate([x, X0[6:]], axis=0) if isinstance(x, ad.Dual) else np.vstack([x, X0[6:]])
                Z = encode(X, M, w, present)
                a, _ = decode_actions(Z, estimate_state(Z, w), og, w)
                return a

            x = X0[:6]
            J = ad.jacobian(pipeline, x)
            J_fd = central_difference_jacobian(lambda v: pipeline(v.reshape(6, 4)), x.reshape(-1), h=1e-4, stencil=5)
            worst = max(worst, rel_err(J, J_fd))
    criterion(8, worst < 1e-4, f"max relative Jacobian error over 4 encoder configs = {worst:.2e} (< 1e-4)")


def test_09_rewards(criterion):
    zero = evaluate_rewards(StateSnapshot(), CommandVector())
    term = evaluate_rewards(StateSnapshot(terminated=True), CommandVector())
    height = evaluate_rewards(StateSnapshot(h=0.9), CommandVector(h=1.0))
    ok = (
        zero.weighted["lin_vel"] == 2.5
        and zero.weighted["ang_vel"] == 2.0
        and term.weighted["termination"] == -40.0
        and abs(height.weighted["height"] + 0.2) <= 1e-12
    )
    criterion(9, ok, f"tracking {zero.weighted['lin_vel']} / {zero.weighted['ang_vel']}, "
                     f"termination {term.weighted['termination']}, height {height.weighted['height']:.15g}")


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_10_determinism(criterion, tmp_path, capsys):
    digests = []
    for run, workers in (("a", 1), ("b", 2)):
        code = main(["randomize", str(template_path()), "--seed", "2024", "--count", "8",
                     "--workers", str(workers), "--outdir", str(tmp_path / run)])
        assert code == 0
        digests.append(_tree_digest(tmp_path / run))
    capsys.readouterr()
    same_run = digests[0] == digests[1]
    pinned = digests[0] == RANDOMIZE_DIGEST
    criterion(10, same_run and pinned,
              f"two runs byte-identical: {same_run}; matches pinned digest: {pinned} "
              f"(only this platform exercised)")


def _close_robots(a, b, tol=1e-9):
    if [ln.name for ln in a.links] != [ln.name for ln in b.links]:
        return False
    if [(j.name, j.parent, j.child, j.actuation) for j in a.joints] != [
        (j.name, j.parent, j.child, j.actuation) for j in b.joints
    ]:
        return False
    for la, lb in zip(a.links, b.links):
        if not np.allclose(la.inertial.to_vector(), lb.inertial.to_vector(), rtol=tol, atol=tol):
            return False
    return all(np.allclose(ja.to_vector(), jb.to_vector(), rtol=tol, atol=tol) for ja, jb in zip(a.joints, b.joints))


def test_11_round_trip_parsing(criterion):
    corpus = [template_path(), *sorted((FIXTURES / "urdf").glob("*.urdf")), *sorted((FIXTURES / "roster").glob("*.urdf"))]
    fixed, dofs = 0, set()
    for path in corpus:
        r1 = load_robot(path)
        text = serialize_robot(r1)
        r2 = parse_robot(text)
        fixed += _close_robots(r1, r2) and serialize_robot(r2) == text
        dofs.add(r1.n_d)
    ok = fixed == len(corpus) and len(dofs) >= 3
    criterion(11, ok, f"{fixed}/{len(corpus)} files reach a fixed point, {len(dofs)} distinct DoF counts")
