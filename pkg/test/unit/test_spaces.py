import math

import numpy as np
import pytest

from   multilambda.exc import DomainError, GridMisfitError
from   multilambda.spaces import AtomicModeSet, BasisState, CompositeBasis, Grid
from   multilambda.spaces import PhotonLadder
from   multilambda.spaces import OperatorMatrix, PlaneWave, StateVector
from   multilambda.spaces import build_annihilation, build_field_op, build_number
from   multilambda.spaces import cosine, inner_product, matrix_function, normalize
from   multilambda.spaces import sinc, tensor_embed

#-------------------------------------------------------------------------------

def make_basis(n_max=2, max_atoms=2):
    modes = AtomicModeSet.ladder({"a": [0.0], "b": [1.0], "3": [0.5]}, max_atoms=max_atoms)
    return CompositeBasis(modes, PhotonLadder(n_max, "a"), PhotonLadder(n_max, "b"))


def vacuum(basis):
    light = np.zeros(basis.light.dim)
    light[0] = 1
    return basis.product_state(basis.atoms.state({}), light)


def test_annihilation_smallest():
    a = build_annihilation(PhotonLadder(1, "a"))
    assert np.array_equal(a.matrix, [[0, 1], [0, 0]])


def test_annihilation_truncation_edge():
    a = build_annihilation(PhotonLadder(2, "a")).matrix
    comm = a @ a.T - a.T @ a
    assert np.allclose(comm, np.diag([1, 1, -2]), atol=1e-15)


def test_number_eigenvalue():
    ladder = PhotonLadder(30, "b")
    a = build_annihilation(ladder).matrix
    n = a.conj().T @ a
    assert n[10, 10] == pytest.approx(10)
    assert np.allclose(n, build_number(ladder).matrix)


def test_ladder_validation():
    with pytest.raises(DomainError):
        PhotonLadder(0, "a")
    with pytest.raises(DomainError):
        PhotonLadder(3, "c")
    assert PhotonLadder(8, "a").dim == 9


def test_basis_dimension():
    basis = make_basis(n_max=2)
    # 3 orbitals: sectors 0, 1, 2 hold 1, 3, 6 configurations.
    assert basis.atoms.dim == 10
    assert basis.dim == 10 * 9
    assert len(set(basis.states())) == basis.dim

    basis = CompositeBasis(
        basis.modes, PhotonLadder(2, "a"), PhotonLadder(1, "b"), sectors=(1, ))
    assert basis.dim == 3 * 6


def test_create_on_vacuum():
    basis = make_basis()
    psi = build_field_op("a", 0, "create", basis) @ vacuum(basis)
    p = basis.modes.orbital("a", 0)
    config = tuple( 1 if i == p else 0 for i in range(basis.modes.n_orbitals) )
    i = basis.index(BasisState(config, 0, 0))
    assert psi.amplitudes[i] == pytest.approx(1)
    assert psi.norm == pytest.approx(1)


def test_annihilate_on_vacuum():
    basis = make_basis()
    psi = build_field_op("b", 0, "annihilate", basis) @ vacuum(basis)
    assert psi.norm == 0


def test_field_op_commutators():
    basis = make_basis()
    a = build_field_op("a", 0, "annihilate", basis)
    b = build_field_op("b", 0, "annihilate", basis)
    assert np.all(a.comm(b).matrix == 0)

    comm = a.comm(b.dag()).matrix
    # Exact below the top sector; creation out of the top sector is truncated.
    counts = basis.level_counts().sum(axis=1)
    below = counts < basis.modes.max_atoms
    assert np.all(comm[:, below] == 0)

    photon = tensor_embed(build_annihilation(basis.light.ladder_a), basis)
    assert np.all(a.comm(photon).matrix == 0)


def test_field_op_unknown():
    basis = make_basis()
    with pytest.raises(DomainError):
        build_field_op("c", 0, "create", basis)
    with pytest.raises(DomainError):
        build_field_op("a", 3, "create", basis)
    with pytest.raises(DomainError):
        build_field_op("a", 0, "destroy", basis)


def test_bilinear_matches_products():
    basis = make_basis()
    atoms = basis.atoms
    n = basis.modes.n_orbitals
    for p in range(n):
        for q in range(n):
            M = np.zeros((n, n))
            M[p, q] = 1
            direct = atoms.annihilation(p).T @ atoms.annihilation(q)
            assert np.allclose(atoms.bilinear(M), direct, atol=1e-14)


def test_tensor_embed_spectrum():
    basis = make_basis(n_max=3)
    local = build_number(basis.light.ladder_b)
    embedded = tensor_embed(local, basis)
    values = np.sort(np.linalg.eigvalsh(embedded.matrix))
    complement = basis.dim // local.space.dim
    expected = np.sort(np.repeat(np.arange(4), complement))
    assert np.allclose(values, expected)


def test_tensor_embed_wrong_space():
    basis = make_basis()
    other = PhotonLadder(5, "a")
    with pytest.raises(DomainError):
        tensor_embed(build_number(other), basis)


def test_normalize_idempotent():
    basis = make_basis()
    rng = np.random.default_rng(0)
    psi = StateVector(rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim), basis)
    once = normalize(psi)
    twice = normalize(once)
    assert abs(inner_product(once, once) - 1) <= 1e-12
    assert np.array_equal(once.amplitudes, twice.amplitudes)
    with pytest.raises(DomainError):
        normalize(StateVector(np.zeros(basis.dim), basis))


def test_matrix_function_zero_cos():
    ladder = PhotonLadder(3, "a")
    zero = OperatorMatrix(np.zeros((4, 4)), ladder, hermitian=True)
    assert np.allclose(matrix_function(zero, cosine(0.7)).matrix, np.eye(4))


def test_matrix_function_sin_zero():
    theta = 0.3
    ladder = PhotonLadder(2, "a")
    op = OperatorMatrix(np.diag([math.pi / theta] * 3), ladder, hermitian=True)
    result = matrix_function(op, lambda x: np.sin(theta * x))
    assert np.allclose(result.matrix, 0, atol=1e-12)


def test_sinc_limit():
    theta = 0.45
    assert sinc(theta)(np.array([0.0]))[0] == pytest.approx(theta)
    assert sinc(theta)(np.array([2.0]))[0] == pytest.approx(math.sin(0.9) / 2)


def test_matrix_function_nonhermitian():
    a = build_annihilation(PhotonLadder(2, "a"))
    with pytest.raises(DomainError):
        matrix_function(a, cosine(1.0))


def test_hermitian_flag_checked():
    ladder = PhotonLadder(1, "a")
    with pytest.raises(DomainError):
        OperatorMatrix([[0, 1], [0, 0]], ladder, hermitian=True)
    with pytest.raises(DomainError):
        OperatorMatrix(np.eye(3), ladder)


def test_ladder_multiplication_shift():
    modes = AtomicModeSet.ladder({"a": [0.0, 1.0], "3": [2.0, 3.0, 4.0]})
    M = modes.multiplication(PlaneWave(0.5j, 2.0), "3", "a")
    assert M.shape == (3, 2)
    assert np.array_equal(M, [[0.5j, 0], [0, 0.5j], [0, 0]])
    # The adjoint shifts back.
    back = modes.multiplication(PlaneWave(0.5j, 2.0).conj(), "a", "3")
    assert np.allclose(back, M.conj().T)


def test_ladder_unique_momenta():
    with pytest.raises(DomainError):
        AtomicModeSet.ladder({"a": [0.0, 0.0]})


def test_grid_orthonormal_check():
    grid = Grid.uniform(2 * math.pi, 64)
    good = grid.plane_waves([0, 1, 2])
    AtomicModeSet.sampled(grid, {"a": good})
    with pytest.raises(DomainError):
        AtomicModeSet.sampled(grid, {"a": 2 * good})


def test_grid_plane_wave_fit():
    grid = Grid.uniform(2 * math.pi, 64)
    assert grid.plane_waves([-3, 0, 5]).shape == (3, 64)
    with pytest.raises(GridMisfitError) as exc_info:
        grid.plane_waves([0, 1.5])
    assert exc_info.value.kappa == 1.5
    with pytest.raises(DomainError):
        Grid.uniform(5.0, 32).plane_waves([1])
    with pytest.raises(DomainError):
        Grid.uniform(2 * math.pi, 64, periodic=False).plane_waves([0])


def test_grid_matches_ladder():
    grid = Grid.uniform(2 * math.pi, 64)
    kappas = {"a": [-1, 0, 1], "3": [0, 1, 2, 3]}
    sampled = AtomicModeSet.sampled(
        grid, { l: grid.plane_waves(k) for l, k in kappas.items() })
    ladder = AtomicModeSet.ladder(kappas)
    fn = PlaneWave(0.3 - 0.1j, 2)
    assert np.allclose(
        sampled.multiplication(fn, "3", "a"), ladder.multiplication(fn, "3", "a"),
        atol=1e-12)


def test_grid_kinetic():
    grid = Grid.uniform(2 * math.pi, 64)
    modes = AtomicModeSet.sampled(grid, {"a": grid.plane_waves([0, 1, 2])})
    T = modes.kinetic("a", 2.0)
    assert np.allclose(T, np.diag([0, 0.25, 1.0]), atol=1e-12)
    assert np.all(modes.kinetic("a", math.inf) == 0)


def test_operator_algebra():
    ladder = PhotonLadder(3, "a")
    a = build_annihilation(ladder)
    n = build_number(ladder)
    assert np.allclose((a.dag() @ a).matrix, n.matrix)
    assert np.allclose(n.comm(a).matrix, -a.matrix)
    assert (2 * n).hermitian
    assert not (1j * n).hermitian
    psi = StateVector([0, 0, 1, 0], ladder)
    assert n.expect(psi) == pytest.approx(2)


