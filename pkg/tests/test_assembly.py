import numpy as np
import pytest

from multitrace.assembly import (
    GalerkinMatrix,
    assemble_calderon,
    assemble_duality,
    discretize,
    eval_potential,
    field_traces,
    layer_operators,
    mass_matrix,
    plane_wave_traces,
)
from multitrace.geometry import (
    build_partition,
    fig1_config,
    square,
    two_domain_circle_config,
)
from multitrace.mtf import operator_matrix, split_diag
from multitrace.quadrature import QuadOrders
from multitrace.specfun import green_and_h1
from oracles import p1_calderon_deviation, single_layer_symbol

CIRCLE = build_partition(two_domain_circle_config())


@pytest.fixture(scope="module")
def circle_discs():
    return {h: discretize(CIRCLE, h) for h in (0.1, 0.05)}


def _angles(disc, mesh):
    xy = disc.skeleton.nodes[mesh.nodes]
    return np.arctan2(xy[:, 1], xy[:, 0])


def test_mass_matrix_unit_panels():
    cfg = {
        "subdomains": [{"kappa": 1.0}, {"kappa": 1.0}],
        "curves": [{"kind": "polygon", "vertices": square(2.0), "between": [0, 1]}],
    }
    disc = discretize(build_partition(cfg), 1.0)
    m = mass_matrix(disc.meshes[1], disc.skeleton)
    assert np.allclose(np.diag(m), 2 / 3, rtol=0, atol=1e-15)
    e = disc.meshes[1].local_panels[0]
    assert m[e[0], e[1]] == pytest.approx(1 / 6, abs=1e-15)
    assert m.sum() == pytest.approx(16.0, abs=1e-13)


def test_duality_structure(get_problem):
    prob = get_problem("fig1", (1.0, 1.0, 1.0), 0.1)
    M = prob.M.data
    assert np.isrealobj(M)
    assert np.array_equal(M.T, -M)
    dm = prob.dofmap
    for j in range(dm.n_subdomains):
        blk = M[dm.dirichlet(j), dm.neumann(j)]
        assert np.array_equal(blk, blk.T)
        assert np.all(np.linalg.eigvalsh(blk) > 0)


def test_dofmap_layout(get_problem):
    prob = get_problem("fig1", (1.0, 1.0, 1.0), 0.1)
    dm = prob.dofmap
    assert dm.dim == sum(2 * m.n_nodes for m in prob.disc.meshes)
    corr = {}
    for j, lj, k, lk in dm.correspondence:
        for a, b in zip(np.atleast_1d(lj), np.atleast_1d(lk)):
            corr[(j, int(a))] = (k, int(b))
            corr[(k, int(b))] = (j, int(a))
    assert all(corr[corr[key]] == key for key in corr)
    # matched nodes are the same skeleton node
    meshes = prob.disc.meshes
    assert all(meshes[j].nodes[a] == meshes[k].nodes[b] for (j, a), (k, b) in corr.items())
    assert len(corr) == sum(m.n_nodes for m in prob.disc.meshes)


@pytest.mark.parametrize("mode", [0, 1, 3])
def test_single_layer_fourier_oracle(circle_discs, mode):
    errs = []
    for h, disc in sorted(circle_discs.items(), reverse=True):
        mesh = disc.meshes[1]
        V, _, _ = layer_operators(mesh, disc.skeleton, 1.0)
        m = mass_matrix(mesh, disc.skeleton)
        c = np.cos(mode * _angles(disc, mesh))
        errs.append(abs((c @ V @ c) / (c @ m @ c) - single_layer_symbol(mode, 1.0)))
    assert errs[-1] < 1e-3
    assert errs[1] / errs[0] < 0.3  # second order


def test_single_layer_symbol_value():
    assert single_layer_symbol(0, 1.0) == pytest.approx(-0.10610 + 0.91972j, abs=1e-4)


def test_layer_matrices_symmetric(circle_discs):
    disc = circle_discs[0.1]
    V, _, W = layer_operators(disc.meshes[1], disc.skeleton, 2.0)
    assert np.max(np.abs(V - V.T)) < 1e-14 * np.max(np.abs(V))
    assert np.max(np.abs(W - W.T)) < 1e-14 * np.max(np.abs(W))


def test_refinement_consistency(get_problem):
    part = build_partition(fig1_config())
    disc = discretize(part, 0.2, QuadOrders())
    fine = discretize(part, 0.2, QuadOrders().doubled())
    a = assemble_calderon(disc).data
    b = assemble_calderon(fine).data
    nz = b != 0
    assert np.array_equal(a != 0, nz)
    assert np.max(np.abs(a - b)[nz] / np.abs(b)[nz]) < 1e-8


def test_quad_order_env_reaches_assembly(monkeypatch):
    monkeypatch.setenv("MTF_QUAD_ORDER", "far=8,near=16")
    disc = discretize(CIRCLE, 0.2)
    assert (disc.orders.far, disc.orders.near) == (8, 16)


def test_calderon_matches_p1_aliasing_model(get_problem):
    # On a uniform P1 circle the discrete Calderon spectrum does not reach +-1:
    # aliasing leaves a mesh-independent spread predicted by the Laplace symbols.
    model = p1_calderon_deviation()
    prob = get_problem("circle", (1.0, 1.0), 0.1)
    eigs = np.linalg.eigvals(prob.OA)
    dist = np.min(np.abs(eigs[:, None] - np.array([1.0, -1.0])), axis=1)
    assert np.median(dist) == pytest.approx(np.median(model), rel=0.1)
    assert dist.max() == pytest.approx(model.max(), rel=0.1)


def test_two_domain_anticommutator(get_problem):
    # Q A0 = -A1 Q in operator form: P O_A + O_A P vanishes
    res = []
    for h in (0.1, 0.05):
        prob = get_problem("circle", (1.0, 1.0), h)
        OA = prob.OA
        C = prob.P.apply(OA) + prob.P.right_multiply(OA)
        res.append(np.linalg.norm(C, 2) / np.linalg.norm(OA, 2))
    assert res[-1] < 0.05
    assert res[1] < res[0] or res[1] < 1e-10


def test_off_diagonal_blocks_are_smoothing(get_problem):
    tops = []
    for h in (0.1, 0.05):
        prob = get_problem("fig1", (1.0, 1.0, 1.0), h)
        _, BT = split_diag(prob.B, prob.dofmap)
        assert np.all(np.isfinite(BT.data))
        s = np.linalg.svd(operator_matrix(prob.dofmap, prob.M, BT), compute_uv=False)
        assert s[20] < 0.1 * s[0]
        tops.append(s[0])
    assert tops[1] == pytest.approx(tops[0], rel=0.05)


def test_off_diagonal_entries_decay_with_separation(get_problem):
    prob = get_problem("fig1", (1.0, 1.0, 1.0), 0.1)
    disc = prob.disc
    dm = prob.dofmap
    mesh = disc.meshes[1]
    xy = disc.skeleton.nodes[mesh.nodes]
    sq = np.flatnonzero(mesh.node_curve == 0)
    ci = np.flatnonzero(mesh.node_curve == 1)
    V = -0.5 * prob.B.data[dm.neumann(1), dm.neumann(1)]
    block = np.abs(V[np.ix_(sq, ci)])
    dist = np.linalg.norm(xy[sq][:, None] - xy[ci][None], axis=2)
    near = block[dist < 0.6].mean()
    far = block[dist > 1.2].mean()
    assert far < near


def _point_source(x0, kappa):
    def value(xy):
        return green_and_h1(kappa, np.hypot(*(xy - x0).T))[0]

    def gradient(xy):
        r = np.hypot(*(xy - x0).T)
        _, f = green_and_h1(kappa, r)
        return -f[:, None] * (xy - x0) / r[:, None]

    return value, gradient


def test_representation_formula(circle_discs):
    x0 = np.array([2.0, 0.5])
    value, gradient = _point_source(x0, 1.0)
    inside = np.array([[0.2, 0.1], [-0.4, 0.3], [0.0, -0.6]])
    outside = np.array([[1.5, -1.0], [0.0, 1.8]])
    errs = []
    for h in (0.1, 0.05):
        disc = circle_discs[h]
        u, p = disc.dofmap.split(field_traces(disc, value, gradient))[1]
        scale = np.abs(value(inside)).max()
        e_in = np.abs(eval_potential(disc, 1, u, p, inside) - value(inside)).max() / scale
        e_out = np.abs(eval_potential(disc, 1, u, p, outside)).max() / scale
        errs.append(max(e_in, e_out))
    assert errs[1] < 5e-4
    assert errs[1] / errs[0] < 0.35


def test_plane_wave_reproduced_at_center(circle_discs):
    errs = []
    for h in (0.1, 0.05):
        u, p = plane_wave_traces(circle_discs[h], 1, (0.6, 0.8), 1.0)
        errs.append(abs(eval_potential(circle_discs[h], 1, u, p, [[0.0, 0.0]])[0] - 1.0))
    assert errs[1] < 5e-4 and errs[1] / errs[0] < 0.35


def test_zero_data_gives_zero(circle_discs):
    disc = circle_discs[0.1]
    n = disc.meshes[1].n_nodes
    assert eval_potential(disc, 1, np.zeros(n), np.zeros(n), [[0.1, 0.2]])[0] == 0


def test_potential_rejects_points_on_boundary(circle_discs):
    disc = circle_discs[0.1]
    n = disc.meshes[1].n_nodes
    with pytest.raises(ValueError, match="too close"):
        eval_potential(disc, 1, np.ones(n), np.ones(n), [[1.0, 0.0]])


def test_jump_relation(circle_discs):
    ang = np.linspace(0, 2 * np.pi, 9)[:-1] + 0.1
    nrm = np.column_stack([np.cos(ang), np.sin(ang)])
    target = np.cos(2 * ang) + 0.5 * np.sin(ang)
    errs = []
    for h in (0.1, 0.05):
        disc = circle_discs[h]
        th = _angles(disc, disc.meshes[1])
        u = np.cos(2 * th) + 0.5 * np.sin(th)
        zero = np.zeros_like(u)
        jump = eval_potential(disc, 1, u, zero, (1 - 5 * h) * nrm) - eval_potential(
            disc, 1, u, zero, (1 + 5 * h) * nrm
        )
        errs.append(np.abs(jump - target).max())
    assert errs[1] < 0.5 and errs[1] / errs[0] < 0.65


def test_matrix_dump_round_trip(tmp_path, get_problem):
    prob = get_problem("circle", (1.0, 1.0), 0.1)
    path = tmp_path / "a.bin"
    prob.B.write(path, prob.dofmap)
    raw = path.read_bytes()
    n = prob.dofmap.dim
    assert int.from_bytes(raw[:8], "little") == n
    assert raw[8:16] == b"A       "
    assert len(raw) == 16 + 16 * n * n
    back = GalerkinMatrix.read(path)
    assert back.role == "A" and np.array_equal(back.data, prob.B.data)
    assert (tmp_path / "a.bin.json").exists()


def test_unknown_role_rejected():
    with pytest.raises(ValueError):
        GalerkinMatrix(np.zeros((2, 2)), "X")


def test_calderon_requires_positive_kappas(circle_discs):
    with pytest.raises(ValueError):
        assemble_calderon(circle_discs[0.1], kappas=(1.0, -1.0))


def test_duality_blocks_match_mass_matrices(circle_discs):
    disc = circle_discs[0.1]
    M = assemble_duality(disc).data
    dm = disc.dofmap
    m = mass_matrix(disc.meshes[0], disc.skeleton)
    assert np.array_equal(M[dm.dirichlet(0), dm.neumann(0)], m)
