import functools
import math

import numpy as np
import pytest
import scipy.linalg

from   multilambda.exc import DomainError, ModelInconsistencyError
from   multilambda.lambda_model import CouplingSet, LambdaModel, LevelScheme
from   multilambda.lambda_model import OpticalMode, Transition, raman_ladder
from   multilambda.pulse import GaussianAmplitude, JointOperators, PulseSpec
from   multilambda.pulse import build_V, build_V2_approx, build_V2_full
from   multilambda.pulse import delta_pulse_U, exact_pulse_U, gaussian_com_energy
from   multilambda.pulse import phase_factor_C, rabi_operator, reduce_model
from   multilambda.pulse import two_photon_couplings
from   multilambda.spaces import AtomicModeSet, BasisState, CompositeBasis
from   multilambda.spaces import OperatorMatrix, PhotonLadder, StateVector

#-------------------------------------------------------------------------------

G = 0.1
# Σ_j Ω*_jb Ω_ja / Δ⁻ with Δ⁻ = −5 on both legs.
OMEGA = 0.002

def raman(*, rwa=True, mass=math.inf, max_atoms=1, sectors=None, n_max=3, steps=2):
    """
    Two-photon resonant: ω_b − ω_a = Ω_a − Ω_b = 5, K = 2.
    """
    levels = LevelScheme({"a": 0.0, "b": 5.0, "3": 105.0}, mass=mass)
    couplings = CouplingSet(
        [ OpticalMode("a", 100.0, 1.0, k=1.0),
          OpticalMode("b", 95.0, 1.0, k=-1.0) ],
        [ Transition("3", l, G * math.sqrt(2)) for l in "ab" ],
        rwa=rwa)
    kappas = raman_ladder(levels, couplings, steps=steps, counter=not rwa)
    modes = AtomicModeSet.ladder(kappas, max_atoms=max_atoms)
    basis = CompositeBasis(
        modes, PhotonLadder(n_max, "a"), PhotonLadder(n_max, "b"), sectors=sectors)
    return LambdaModel(levels, couplings, basis)


def index(model, atoms, n_a, n_b):
    modes = model.modes
    config = [0] * modes.n_orbitals
    for level, kappa in atoms:
        config[modes.orbital(level, modes.find(level, kappa))] += 1
    return model.basis.index(BasisState(tuple(config), n_a, n_b))


def basis_vector(model, i):
    amplitudes = np.zeros(model.basis.dim, dtype=complex)
    amplitudes[i] = 1
    return StateVector(amplitudes, model.basis)


@functools.lru_cache(maxsize=None)
def single():
    model = raman(sectors=(1, ))
    return model, reduce_model(model)


@functools.lru_cache(maxsize=None)
def pair():
    model = raman(max_atoms=2, sectors=(2, ), n_max=2)
    return model, reduce_model(model)


#-------------------------------------------------------------------------------

def test_pulse_spec():
    pulse = PulseSpec(1.0, 2.0)
    assert pulse.theta == 0.5
    assert PulseSpec.from_theta(0.25, 4.0).area == 1.0
    with pytest.raises(DomainError):
        PulseSpec(1.0, 0.0)
    with pytest.raises(DomainError):
        PulseSpec(-1.0)


def test_two_photon_coupling():
    model, _ = single()
    omega, lambda_ = two_photon_couplings(model)
    assert omega.amplitude == pytest.approx(-OMEGA)
    assert omega.k == 2
    assert lambda_.magnitude == 0
    joint = JointOperators(model)
    assert joint.phi_omega == pytest.approx(math.pi)


def test_joint_operators():
    model, _ = single()
    joint = JointOperators(model)
    assert joint.commutator_defect() <= 1e-12
    # ĉ conserves the total photon number.
    n_a, n_b = model.light.photon_numbers()
    rows, cols = np.nonzero(np.abs(joint.c.matrix) > 0)
    assert np.all(n_a[rows] + n_b[rows] == n_a[cols] + n_b[cols])
    assert np.all(n_a[rows] == n_a[cols] - 1)
    # ψ̂_c moves a(0) to b(K).
    a0 = model.basis.atoms.state({model.modes.orbital("a", 0): 1})
    b2 = model.basis.atoms.state({model.modes.orbital("b", model.modes.find("b", 2.0)): 1})
    assert np.allclose(joint.psi_c @ a0, b2)


def test_V_hermitian_and_conserving():
    model, reduced = single()
    V = build_V(reduced)
    assert V.defect() <= 1e-14
    total = model.light.number("a") + model.light.number("b")
    N = model.operator(np.eye(model.basis.atoms.dim), total.matrix)
    assert np.max(np.abs(V.comm(N).matrix)) == 0
    assert np.allclose((reduced.H0 + V).matrix, reduced.H_R().matrix, rtol=0, atol=0)


def test_rabi_eigenvalues():
    model, reduced = single()
    rabi = reduced.rabi()
    for n_a, n_b in ((1, 0), (2, 1), (3, 0), (0, 0), (0, 2)):
        i = index(model, [("a", 0.0)], n_a, n_b)
        psi = basis_vector(model, i)
        value = rabi.expect(psi).real
        assert value == pytest.approx(OMEGA * math.sqrt(n_a * (n_b + 1)), abs=1e-14)
        # The bare state is an eigenvector.
        assert np.linalg.norm((rabi @ psi).amplitudes - value * psi.amplitudes) <= 1e-14


def test_rabi_eigenvalue_two_atoms():
    model, reduced = pair()
    rabi = reduced.rabi()
    i = index(model, [("a", 0.0), ("b", 2.0)], 1, 1)
    value = rabi.expect(basis_vector(model, i)).real
    assert value == pytest.approx(2 * OMEGA * math.sqrt(2), rel=1e-12)


def test_rabi_operator_negative():
    ladder = PhotonLadder(1, "a")
    with pytest.raises(ModelInconsistencyError):
        rabi_operator(OperatorMatrix(np.diag([1.0, -0.5]), ladder, hermitian=True))
    root = rabi_operator(OperatorMatrix(np.diag([4.0, -1e-12]), ladder, hermitian=True))
    assert np.allclose(root.matrix, np.diag([2.0, 0.0]))


def test_zero_theta_identity():
    model, reduced = single()
    U = delta_pulse_U(PulseSpec(0.0), reduced)
    assert np.allclose(U.matrix, np.eye(model.basis.dim), rtol=0, atol=1e-13)


def test_pulse_instant():
    _, reduced = single()
    t = 0.7
    wait = scipy.linalg.expm(-1j * t * reduced.H0.matrix)
    pulse = PulseSpec.from_theta(0.4)
    later = PulseSpec.from_theta(0.4, instant=t)
    for build in (delta_pulse_U, exact_pulse_U):
        U = build(later, reduced)
        assert np.allclose(U.matrix, build(pulse, reduced).matrix @ wait, atol=1e-9)


def test_half_pi_transfer():
    model, reduced = single()
    pulse = PulseSpec.from_theta(math.pi / 2 / OMEGA)
    U = delta_pulse_U(pulse, reduced)
    out = U.apply(basis_vector(model, index(model, [("a", 0.0)], 1, 0)))
    p = out.probabilities()
    assert p[index(model, [("b", 2.0)], 0, 1)] == pytest.approx(1, abs=1e-10)
    assert p.sum() == pytest.approx(1, abs=1e-10)


def test_rabi_closed_form():
    model, reduced = single()
    start = basis_vector(model, index(model, [("a", 0.0)], 2, 1))
    target = index(model, [("b", 2.0)], 1, 2)
    stay = index(model, [("a", 0.0)], 2, 1)
    rate = OMEGA * math.sqrt(2 * 2)
    for theta in np.linspace(0, 2 * math.pi / rate, 100):
        p = delta_pulse_U(PulseSpec.from_theta(theta), reduced).apply(start).probabilities()
        assert abs(p[target] - math.sin(theta * rate) ** 2) <= 1e-10
        assert abs(p[stay] + p[target] - 1) <= 1e-10


def test_rwa_unitarity():
    _, reduced = single()
    for theta in (10.0, 333.0, 1234.5):
        U = delta_pulse_U(PulseSpec.from_theta(theta), reduced)
        assert U.unitarity_defect <= 1e-10


def test_removable_singularity():
    model, reduced = single()
    i = index(model, [("a", 0.0)], 0, 0)
    theta = 17.0
    out = delta_pulse_U(PulseSpec.from_theta(theta), reduced).apply(basis_vector(model, i))
    expected = np.zeros(model.basis.dim, dtype=complex)
    expected[i] = np.exp(-1j * theta * reduced.H0.matrix[i, i])
    assert np.allclose(out.amplitudes, expected, rtol=0, atol=1e-12)


def test_exact_pulse_matches_on_resonant_pair():
    model, reduced = single()
    pulse = PulseSpec.from_theta(math.pi / 3 / OMEGA)
    start = basis_vector(model, index(model, [("a", 0.0)], 1, 0))
    delta = delta_pulse_U(pulse, reduced).apply(start).probabilities()
    exact = exact_pulse_U(pulse, reduced).apply(start).probabilities()
    assert np.max(np.abs(delta - exact)) <= 1e-9


def test_V2_without_counter_rotation():
    _, reduced = pair()
    full = build_V2_full(reduced)
    approx = build_V2_approx(reduced)
    assert np.allclose(full.matrix, approx.op.matrix, rtol=0, atol=1e-18)
    assert all( d.norm == 0 for d in approx.dropped )


def test_V2_dropped_bound():
    model = raman(rwa=False, max_atoms=2, n_max=2)
    reduced = reduce_model(model)
    full = build_V2_full(reduced)
    approx = build_V2_approx(reduced)
    assert len(approx.dropped) == 10
    assert {"PQ", "QP", "QQ", "Q†Q†"} <= { d.name for d in approx.dropped }
    bound = sum( d.norm for d in approx.dropped )
    assert bound > 0
    assert np.linalg.norm(full.matrix - approx.op.matrix) <= bound * (1 + 1e-12)


#-------------------------------------------------------------------------------
# Center-of-mass energy

def laplacian_ratio(f, point, h):
    point = np.asarray(point, dtype=float)
    total = 0
    for axis in range(len(point)):
        step = np.zeros_like(point)
        step[axis] = h
        total += f(point + step) - 2 * f(point) + f(point - step)
    return total / h ** 2 / f(point)


def gaussian(amp):
    def f(x):
        r2 = np.sum(x ** 2)
        return amp.normalization * np.exp(-r2 / (2 * amp.sigma ** 2) + 1j * amp.kappa * x[0])
    return f


@pytest.mark.parametrize("dimension", [1, 3])
def test_com_energy_finite_difference(dimension):
    mass = 2.0
    for sigma in np.linspace(0.5, 2.0, 5):
        for kappa in np.linspace(-2.0, 2.0, 5):
            amp = GaussianAmplitude(sigma, kappa, dimension)
            R = 0.37 * sigma
            point = [R] + [0.0] * (dimension - 1)
            expected = -laplacian_ratio(gaussian(amp), point, 1e-4 * sigma) / (2 * mass)
            energy = gaussian_com_energy(amp, R, mass)
            assert abs(energy - expected) <= 1e-6 * abs(expected)


def test_com_energy_values():
    mass, sigma = 3.0, 0.7
    assert gaussian_com_energy(GaussianAmplitude(sigma, 0.0, 3), 0.0, mass) == pytest.approx(
        3 / (2 * mass * sigma ** 2))
    assert gaussian_com_energy(GaussianAmplitude(sigma), sigma, mass).real == pytest.approx(0)
    assert gaussian_com_energy(GaussianAmplitude(sigma, 1.0), 0.4, math.inf) == 0
    with pytest.raises(DomainError):
        GaussianAmplitude(0.0)
    with pytest.raises(DomainError):
        GaussianAmplitude(1.0, dimension=2)


def test_gaussian_normalization():
    amp = GaussianAmplitude(0.8, 1.5)
    R = np.linspace(-10, 10, 4001)
    density = np.abs(amp.values(R)) ** 2
    assert np.sum(density) * (R[1] - R[0]) == pytest.approx(1, rel=1e-9)


#-------------------------------------------------------------------------------
# Phase factors

def test_phase_factor_matches_H0():
    model = raman(rwa=False, mass=4.0, steps=3, sectors=(1, ))
    reduced = reduce_model(model)
    for level, kappa in (("a", 0.0), ("b", 2.0)):
        i = index(model, [(level, kappa)], 1, 1)
        C = phase_factor_C((1, 1), level, kappa, model)
        assert C == pytest.approx(reduced.H0.matrix[i, i], rel=1e-14)


def test_phase_factor_photon_dependence():
    model = raman(rwa=False, sectors=(1, ))
    step = phase_factor_C((2, 0), "a", 0.0, model) - phase_factor_C((1, 0), "a", 0.0, model)
    assert step == pytest.approx(100 - 0.2 * G ** 2 - G ** 2 / 205, rel=1e-12)
    rwa = raman(sectors=(1, ))
    step = phase_factor_C((2, 0), "a", 0.0, rwa) - phase_factor_C((1, 0), "a", 0.0, rwa)
    assert step == pytest.approx(100 - 0.2 * G ** 2, rel=1e-12)


def test_phase_factor_free():
    model = raman(sectors=(1, ))
    amp = GaussianAmplitude(1.0)
    C = phase_factor_C((0, 0), "b", amp, model)
    assert C == pytest.approx(100 * 0.5 + 95 * 0.5 + 5.0)
    with pytest.raises(DomainError):
        phase_factor_C((0, 0), "3", amp, model)


