import numpy as np
import pytest

from robinlab.domain import GridSpec
from robinlab.errors import ConfigurationError, HypothesisViolation, MetadataMismatch
from robinlab.forward import RobinOperator, RobinProblem, assemble_operator
from robinlab.green import (boundary_limit_columns, corner_distance, green_columns, green_rows,
                            green_symmetry_residual, kernel_relation_residual, nearest_nodes,
                            resolvent_difference_residual)
from robinlab.impedance import assemble_map

from conftest import LADDER, bump_on, orders, refines, zero

INNER_POINTS = [(0.3, 0.4), (0.62, 0.55), (0.5, 0.2), (0.75, 0.7), (0.45, 0.8)]
EDGE_POINTS = [(0.5, 0.0), (1.0, 0.35), (0.6, 1.0), (0.0, 0.7)]


def mixed_sources(grid):
    inner = nearest_nodes(grid, INNER_POINTS)
    edge = nearest_nodes(grid, EDGE_POINTS, boundary=True)
    return np.concatenate([inner, edge])


def test_columns_solve_the_point_source_equation():
    grid = GridSpec(16)
    p = RobinProblem(bump_on(grid), -1.0, np.pi / 3)
    src = nearest_nodes(grid, INNER_POINTS)
    G = green_columns(p, src)
    A = assemble_operator(p)
    rhs = np.zeros((grid.n_nodes, len(src)))
    rhs[src, np.arange(len(src))] = -1 / grid.h**2
    assert np.allclose(A @ G.matrix, rhs, atol=1e-9)


def test_linear_in_source_strength():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.5)
    op = RobinOperator(p)
    y = nearest_nodes(grid, [(0.4, 0.6)])[0]
    rhs = np.zeros(grid.n_nodes)
    rhs[y] = -3.5 / grid.h**2
    assert np.allclose(op.solve(rhs), 3.5 * green_columns(p, [y], op).matrix[:, 0], atol=1e-12)


def test_dirichlet_column_matches_dense_and_decays():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.0)
    i0, j0 = 6, 9
    y = grid.index_map[i0, j0]
    col = green_columns(p, [y]).matrix[:, 0].real
    e = np.zeros(grid.n_nodes)
    e[y] = -1 / grid.h**2
    assert np.allclose(col, np.linalg.solve(assemble_operator(p).toarray(), e), atol=1e-10)
    # G solves (Lap - 1) G = delta, so it is negative and |G| decays from the source
    for line in (col[grid.index_map[i0:, j0]], col[grid.index_map[i0::-1, j0]],
                 col[grid.index_map[i0, j0:]], col[grid.index_map[i0, j0::-1]]):
        assert np.all(np.diff(np.abs(line)) < 0)
    assert np.all(col[: grid.n_interior] < 0)


def test_reflection_symmetry():
    grid = GridSpec(16)
    p = RobinProblem(bump_on(grid), -1.0, 0.7)
    n = grid.n
    y, y_ref = grid.index_map[4, 7], grid.index_map[n + 1 - 4, 7]
    G = green_columns(p, [y, y_ref])
    a = G.column(y).as_array(corner=0)
    b = G.column(y_ref).as_array(corner=0)
    assert np.allclose(a, b[::-1, :], atol=1e-12)


def test_interior_symmetry_dirichlet():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.0)
    rng = np.random.default_rng(7)
    src = np.unique(rng.integers(0, grid.n_interior, 20))
    assert green_symmetry_residual(green_columns(p, src)) <= 1e-8


def test_single_source_symmetry_zero():
    grid = GridSpec(16)
    G = green_columns(RobinProblem(zero(grid), -1.0, 1.0), [17])
    assert green_symmetry_residual(G) == 0.0


def test_boundary_interior_symmetry_refines():
    res = []
    for n in LADDER:
        grid = GridSpec(n)
        p = RobinProblem(bump_on(grid), -1.0, np.pi / 3)
        res.append(green_symmetry_residual(green_columns(p, mixed_sources(grid))))
    assert np.all(orders(res) >= 1.0)


def test_boundary_sources_need_sine():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.0)
    with pytest.raises(HypothesisViolation):
        green_columns(p, [grid.n_interior + 3])
    with pytest.raises(HypothesisViolation):
        boundary_limit_columns(p, [grid.n_interior + 3])


def test_source_validation():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.3)
    with pytest.raises(ConfigurationError):
        green_columns(p, [grid.n_nodes])
    with pytest.raises(ConfigurationError):
        green_columns(p, [3, 3])


def test_rows_are_transposed_columns():
    grid = GridSpec(16)
    p = RobinProblem(bump_on(grid), -1.0, np.pi / 3)
    x = nearest_nodes(grid, INNER_POINTS)
    rows = green_rows(p, x)
    G = green_columns(p, x)
    # G(x_k, x_l) from rows and columns
    assert np.allclose(rows[x, :].T, G.matrix[x, :], atol=1e-10)


def test_ntd_is_green_restricted_to_boundary():
    grid = GridSpec(16)
    p = RobinProblem(bump_on(grid), -1.0, np.pi / 2)
    bsrc = grid.n_interior + np.arange(grid.n_boundary)
    G = green_columns(p, bsrc)
    M = assemble_map(p)
    assert np.abs(M.kernel() - G.matrix[grid.boundary.nodes]).max() <= 1e-8


@pytest.mark.parametrize("alpha, use_bump", [(np.pi / 2, False), (np.pi / 4, True)])
def test_kernel_relation_consistent_sources(alpha, use_bump):
    res = []
    for n in LADDER:
        grid = GridSpec(n)
        v = bump_on(grid) if use_bump else zero(grid)
        p = RobinProblem(v, -1.0, alpha)
        op = RobinOperator(p)
        bsrc = grid.n_interior + np.arange(grid.n_boundary)
        res.append(kernel_relation_residual(assemble_map(p, op), green_columns(p, bsrc, op), alpha))
    assert max(res) <= 1e-8
    assert refines(res)


@pytest.mark.parametrize("alpha, use_bump", [(np.pi / 2, False), (np.pi / 4, True)])
def test_kernel_relation_from_interior_limits(alpha, use_bump):
    res = []
    for n in LADDER:
        grid = GridSpec(n)
        v = bump_on(grid) if use_bump else zero(grid)
        p = RobinProblem(v, -1.0, alpha)
        op = RobinOperator(p)
        nodes = grid.n_interior + np.flatnonzero(corner_distance(grid.boundary.xy) >= 0.1)
        G = boundary_limit_columns(p, nodes, op)
        res.append(kernel_relation_residual(assemble_map(p, op), G, alpha, 0.1, 0.1))
    assert res[1] <= 5e-2
    assert np.all(orders(res) >= 1.0)


def test_kernel_relation_rejects_dtn():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.0)
    M = assemble_map(p)
    G = green_columns(p, [0])
    with pytest.raises(HypothesisViolation):
        kernel_relation_residual(M, G, 0.0)


def test_kernel_relation_metadata():
    grid = GridSpec(16)
    p = RobinProblem(zero(grid), -1.0, 0.5)
    G = green_columns(p, [grid.n_interior])
    M = assemble_map(p.with_alpha(0.6))
    with pytest.raises(MetadataMismatch):
        kernel_relation_residual(M, G, 0.5)


def resolvent_setup(n, amp=0.2, alpha=np.pi / 2):
    grid = GridSpec(n)
    p1 = RobinProblem(zero(grid), -1.0, alpha)
    p2 = RobinProblem(bump_on(grid, amp, (0.5, 0.5), 0.1), -1.0, alpha)
    src = nearest_nodes(grid, INNER_POINTS)
    pairs = list(zip(np.roll(src, 1), src))
    return p1, p2, src, pairs


def test_resolvent_same_potential_zero():
    p1, _, src, pairs = resolvent_setup(16)
    G = green_columns(p1, src)
    assert resolvent_difference_residual(G, G, pairs) <= 1e-13


def test_resolvent_identity_refines():
    res = []
    for n in LADDER:
        p1, p2, src, pairs = resolvent_setup(n)
        res.append(resolvent_difference_residual(green_columns(p1, src), green_columns(p2, src), pairs))
    assert res[1] <= 1e-3
    assert refines(res)


def test_resolvent_swap_antisymmetric():
    p1, p2, src, pairs = resolvent_setup(16, alpha=np.pi / 3)
    G1, G2 = green_columns(p1, src), green_columns(p2, src)
    grid = p1.grid
    rows2 = green_rows(p2, src)
    dv = (p1.v.values - p2.v.values).real[: grid.n_interior]
    for x, y in pairs:
        k = list(src).index(x)
        vol12 = np.sum(dv * green_rows(p1, [x])[: grid.n_interior, 0]
                       * G2.matrix[: grid.n_interior, list(src).index(y)]) * grid.h**2
        vol21 = np.sum(-dv * rows2[: grid.n_interior, k]
                       * G1.matrix[: grid.n_interior, list(src).index(y)]) * grid.h**2
        # G1 - G2 = V12 and G2 - G1 = V21
        assert vol12 == pytest.approx(-vol21, rel=1e-9)
    assert resolvent_difference_residual(G2, G1, pairs) <= 1e-9


def test_nearest_nodes():
    grid = GridSpec(16)
    k = nearest_nodes(grid, [(grid.h * 3, grid.h * 5)])[0]
    assert np.allclose(grid.xy[k], (3 * grid.h, 5 * grid.h))
    kb = nearest_nodes(grid, [(0.5, -0.1)], boundary=True)[0]
    assert kb >= grid.n_interior and grid.xy[kb][1] == 0.0
