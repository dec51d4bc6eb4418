import math

import numpy as np
import pytest

from   multilambda.averaging import FilterSpec, HarmonicHamiltonian, Verdict
from   multilambda.averaging import averaged_observable, classify_frequency
from   multilambda.averaging import dressed_observable, micromotion, to_averaged_state
from   multilambda.averaging import effective_hamiltonian, exact_evolve
from   multilambda.averaging import inverse_detuning_sum, low_pass
from   multilambda.averaging import second_order_generator, to_schrodinger
from   multilambda.exc import DomainError, InsufficientDataError
from   multilambda.exc import SingularDetuningError
from   multilambda.spaces import OperatorMatrix, PhotonLadder, StateVector

#-------------------------------------------------------------------------------

def space(dim):
    return PhotonLadder(dim - 1, "a")


def op(matrix, space, hermitian=False):
    return OperatorMatrix(np.asarray(matrix, dtype=complex), space, hermitian)


def projector(i, j, dim, space):
    m = np.zeros((dim, dim))
    m[i, j] = 1
    return op(m, space)


def test_inverse_detuning_sum():
    assert inverse_detuning_sum(-5, -5, +1) == pytest.approx(-1 / 5)
    assert inverse_detuning_sum(10, -10, "+") == 0
    assert inverse_detuning_sum(4, 6) == pytest.approx(5 / 24)
    assert inverse_detuning_sum(4, 6, -1) == pytest.approx(1 / 24)
    with pytest.raises(SingularDetuningError):
        inverse_detuning_sum(0, 3)


def test_classify_frequency():
    filter = FilterSpec(1.0)
    assert classify_frequency(100 + 105, filter) is Verdict.DROP
    assert classify_frequency(100 - 100.5, filter) is Verdict.KEEP
    assert classify_frequency(0, filter) is Verdict.KEEP
    with pytest.raises(DomainError):
        FilterSpec(0)
    with pytest.raises(DomainError):
        FilterSpec(1, "boxcar")


def test_no_terms():
    s = space(3)
    H0 = op(np.diag([0, 1, 2]), s, True)
    h = HarmonicHamiltonian(H0)
    assert np.array_equal(effective_hamiltonian(h, FilterSpec(1)).matrix, H0.matrix)


def test_two_level_toy():
    s = space(2)
    g, delta = 0.1, -5
    sigma_minus = op([[0, g], [0, 0]], s)
    h = HarmonicHamiltonian(op(np.zeros((2, 2)), s, True), [(sigma_minus, delta)])
    H = effective_hamiltonian(h, FilterSpec(1))
    assert np.allclose(H.matrix, g ** 2 / delta * np.diag([-1, 1]), atol=1e-15)


def test_single_term_time_independent():
    s = space(3)
    h_op = op([[0, 0, 0], [0.2, 0, 0], [0, 0.1, 0]], s)
    h = HarmonicHamiltonian(op(np.diag([0, 1, 3]), s, True), [(h_op, 7.0)])
    H1 = effective_hamiltonian(h, FilterSpec(1), t=0.3)
    H2 = effective_hamiltonian(h, FilterSpec(1), t=17.1)
    assert np.array_equal(H1.matrix, H2.matrix)
    expected = h.H0.matrix + h_op.dag().comm(h_op).matrix / 7.0
    assert np.allclose(H1.matrix, expected, atol=1e-15)


def test_effective_hermitian():
    s = space(4)
    rng = np.random.default_rng(1)
    terms = [
        (op(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)), s), f)
        for f in (-5.0, -5.2, -4.9)
    ]
    fast = [
        (op(rng.normal(size=(4, 4)), s), f) for f in (200.0, 201.0)
    ]
    h = HarmonicHamiltonian(op(np.diag([0, 1, 2, 3]), s, True), terms, fast)
    for t in (0, 0.7, 11.3):
        H = effective_hamiltonian(h, FilterSpec(2.0), t)
        assert H.defect() <= 1e-12


def test_cross_domain_dropped():
    s = space(2)
    h_op = op([[0, 1], [0, 0]], s)
    g_op = op([[0, 0], [1, 0]], s)
    h = HarmonicHamiltonian(op(np.zeros((2, 2)), s, True), [(h_op, -5)], [(g_op, 205)])
    H = effective_hamiltonian(h, FilterSpec(1))
    expected = h_op.dag().comm(h_op).matrix / -5 + g_op.dag().comm(g_op).matrix / 205
    assert np.allclose(H.matrix, expected, atol=1e-15)


def test_generator_single_frequency_empty():
    s = space(2)
    h = HarmonicHamiltonian(op(np.zeros((2, 2)), s, True), [(op([[0, 1], [0, 0]], s), 3.0)])
    gen = second_order_generator(h, FilterSpec(1))
    assert gen.anticommutator_terms == ()
    assert gen.dissipator_terms == ()


def test_generator_equal_frequencies_empty():
    s = space(3)
    h = HarmonicHamiltonian(
        op(np.zeros((3, 3)), s, True),
        [(projector(2, 0, 3, s), 4.0), (projector(2, 1, 3, s), 4.0)])
    gen = second_order_generator(h, FilterSpec(1))
    assert len(gen.anticommutator_terms) == 0
    assert len(gen.dissipator_terms) == 0


def test_generator_coefficients():
    s = space(3)
    h = HarmonicHamiltonian(
        op(np.zeros((3, 3)), s, True),
        [(projector(2, 0, 3, s), 4.0), (projector(2, 1, 3, s), 6.0)])
    gen = second_order_generator(h, FilterSpec(5))
    coefficients = sorted( t.coefficient for t in gen.anticommutator_terms )
    assert coefficients == pytest.approx([-1 / 24, 1 / 24])
    assert sorted( abs(t.frequency) for t in gen.dissipator_terms ) == [2.0, 2.0]
    assert gen.H_eff.defect() <= 1e-12


def test_generator_reduces_to_heisenberg():
    s = space(3)
    H0 = op(np.diag([0.0, 0.5, 2.0]), s, True)
    h = HarmonicHamiltonian(H0, [(projector(2, 0, 3, s), 4.0)])
    gen = second_order_generator(h, FilterSpec(1))
    O = projector(0, 1, 3, s)
    H = gen.H_eff.matrix
    assert np.allclose(gen.rhs(O, 0.0), 1j * (H @ O.matrix - O.matrix @ H))
    trace = gen.propagate(O, [0.0, 0.5, 1.0])
    assert len(trace) == 3
    assert np.allclose(trace[0].matrix, O.matrix)


def test_exact_zero_hamiltonian():
    s = space(3)
    h = HarmonicHamiltonian(op(np.zeros((3, 3)), s, True))
    psi0 = StateVector([0.6, 0.8j, 0], s)
    trace = exact_evolve(h, psi0, np.linspace(0, 5, 11))
    for psi in trace:
        assert np.allclose(psi.amplitudes, psi0.amplitudes, atol=1e-12)


def test_exact_fock_phase():
    omega, n = 1.3, 2
    ladder = PhotonLadder(4, "a")
    h = HarmonicHamiltonian(op(omega * np.diag(np.arange(5)), ladder, True))
    psi0 = StateVector(np.eye(5)[n], ladder)
    t_grid = np.linspace(0, 4, 9)
    trace = exact_evolve(h, psi0, t_grid, method="rk45")
    for t, psi in zip(t_grid, trace):
        assert abs(abs(psi.amplitudes[n]) - 1) <= 1e-9
        assert psi.amplitudes[n] == pytest.approx(np.exp(-1j * omega * n * t), abs=1e-8)


def test_exact_grid_checked():
    s = space(2)
    h = HarmonicHamiltonian(op(np.zeros((2, 2)), s, True))
    with pytest.raises(DomainError):
        exact_evolve(h, StateVector([1, 0], s), [0, 1, 1])


def lambda_system(g=0.1, delta=-5.0):
    """
    Three-level Λ: states a, b, j; both legs detuned by `delta`.
    """
    s = space(3)
    h_a = op(g * np.eye(3)[:, [0]] @ np.eye(3)[[2], :], s).dag()
    h_b = op(g * np.eye(3)[:, [1]] @ np.eye(3)[[2], :], s).dag()
    frame = op(np.diag([0, 0, -delta]), s, True)
    return HarmonicHamiltonian(
        op(np.zeros((3, 3)), s, True), [(h_a, delta), (h_b, delta)], frame=frame)


def test_spectral_matches_rk45():
    h = lambda_system()
    psi0 = StateVector([1, 0, 0], h.space)
    t_grid = np.linspace(0, 20, 41)
    spectral = exact_evolve(h, psi0, t_grid, method="spectral")
    rk45 = exact_evolve(h, psi0, t_grid, method="rk45")
    for a, b in zip(spectral, rk45):
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-7)


def test_schrodinger_restoration():
    h = lambda_system()
    H_I = effective_hamiltonian(h, FilterSpec(1))
    assert np.allclose(
        to_schrodinger(h, H_I, 0).matrix, to_schrodinger(h, H_I, 3.7).matrix, atol=1e-14)


def test_oracle_agreement():
    g, delta = 0.1, -5.0
    h = lambda_system(g, delta)
    filter = FilterSpec(2.0)
    rabi = g ** 2 / abs(delta)
    dt = 0.25
    t_grid = np.arange(0, math.pi / rabi + dt, dt)
    psi0 = StateVector([1, 0, 0], h.space)

    trace = exact_evolve(h, psi0, t_grid)
    exact = low_pass(np.array([ psi.probabilities() for psi in trace ]), dt, filter)

    H = effective_hamiltonian(h, filter)
    phi0 = to_averaged_state(h, psi0)
    spectrum = H.spectrum()
    coeffs = spectrum.vectors.conj().T @ phi0.amplitudes
    phases = np.exp(-1j * np.outer(t_grid, spectrum.values))
    phi = (phases * coeffs) @ spectrum.vectors.T
    effective = np.column_stack([
        dressed_observable(h, filter, op(np.diag(np.eye(3)[i]), h.space, True)).values(phi, t_grid)
        for i in range(3)
    ])

    edge = int(math.ceil(filter.half_width / dt))
    interior = slice(edge, len(t_grid) - edge)
    assert np.max(np.abs(exact[interior] - effective[interior])) <= 2e-3
    # The ancilla admixture is present from the start on both sides.
    assert effective[edge, 2] == pytest.approx(exact[edge, 2], abs=1e-4)
    assert effective[edge, 2] > 5e-4
    # The transfer actually happens.
    assert effective[:, 1].max() > 0.99


def test_dressed_two_level():
    s = space(2)
    g, delta = 0.1, -5.0
    eps = (g / delta) ** 2
    sigma_minus = op([[0, g], [0, 0]], s)
    h = HarmonicHamiltonian(op(np.zeros((2, 2)), s, True), [(sigma_minus, delta)])

    K = micromotion(h).matrix
    assert np.allclose(K, -K.conj().T, atol=1e-15)
    assert np.allclose(K, [[0, g / delta], [-g / delta, 0]], atol=1e-15)

    dressed = dressed_observable(h, FilterSpec(1.0), op(np.diag([1, 0]), s, True))
    assert [ f for _, f in dressed.components ] == [0.0]
    assert np.allclose(dressed.at(3.0).matrix, np.diag([1 - eps, eps]), atol=1e-15)
    values = dressed.values(np.array([[1, 0], [0, 1]]), [0.0, 1.0])
    assert values == pytest.approx([1 - eps, eps], abs=1e-15)

    phi = to_averaged_state(h, StateVector([1, 0], s))
    assert phi.norm == pytest.approx(1, abs=1e-14)
    assert abs(phi.amplitudes[1]) ** 2 == pytest.approx(eps, rel=1e-3)


def test_dressed_other_space():
    h = lambda_system()
    with pytest.raises(DomainError):
        dressed_observable(h, FilterSpec(1.0), projector(0, 0, 2, space(2)))


def trace_for(values_fn, t_grid):
    """
    States on a two-level space whose σ_x expectation follows a signal.
    """
    s = space(2)
    trace = []
    for t in t_grid:
        x = values_fn(t)
        # ⟨σ_x⟩ = cos(φ) for (1, e^{iφ})/√2.
        trace.append(StateVector(np.array([1, np.exp(1j * math.acos(x))]) / math.sqrt(2), s))
    return s, trace


def test_averaged_constant():
    t_grid = np.arange(0, 200, 0.1)
    s, trace = trace_for(lambda t: 0.3, t_grid)
    sigma_x = op([[0, 1], [1, 0]], s, True)
    series = averaged_observable(trace, t_grid, FilterSpec(1.0), sigma_x)
    assert np.allclose(series.values, 0.3, atol=1e-12)


def test_averaged_tone_attenuated():
    cutoff = 1.0
    filter = FilterSpec(cutoff, "ideal")
    t_grid = np.arange(0, 600, 0.05)
    tone = 3 * cutoff
    s, trace = trace_for(lambda t: math.cos(tone * t), t_grid)
    sigma_x = op([[0, 1], [1, 0]], s, True)
    series = averaged_observable(trace, t_grid, filter, sigma_x)
    edge = int(math.ceil(filter.half_width / 0.05))
    assert np.max(np.abs(series.values[edge : -edge])) <= 1e-2


def test_averaged_dc_plus_tone():
    filter = FilterSpec(1.0)
    t_grid = np.arange(0, 300, 0.05)
    s, trace = trace_for(lambda t: 0.4 + 0.5 * math.cos(8 * t), t_grid)
    sigma_x = op([[0, 1], [1, 0]], s, True)
    series = averaged_observable(trace, t_grid, filter, sigma_x)
    edge = int(math.ceil(filter.half_width / 0.05))
    assert np.allclose(series.values[edge : -edge], 0.4, rtol=1e-2)


def test_averaged_insufficient():
    t_grid = np.arange(0, 5, 0.1)
    s, trace = trace_for(lambda t: 0.0, t_grid)
    sigma_x = op([[0, 1], [1, 0]], s, True)
    with pytest.raises(InsufficientDataError):
        averaged_observable(trace, t_grid, FilterSpec(1.0), sigma_x)


def test_averaged_nonuniform():
    t_grid = np.sort(np.concatenate([np.arange(0, 200, 0.1), [50.05, 120.02]]))
    s, trace = trace_for(lambda t: 0.25, t_grid)
    sigma_x = op([[0, 1], [1, 0]], s, True)
    series = averaged_observable(trace, t_grid, FilterSpec(1.0), sigma_x)
    assert np.ptp(np.diff(series.times)) < 1e-9
    assert np.allclose(series.values, 0.25, atol=1e-12)


