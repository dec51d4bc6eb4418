"""
Delta pulses on the Rabi block.

Restricted to the relevant levels, the effective Hamiltonian is

  H_R = H₀⁽²⁾ + 𝒱̂,   H₀⁽²⁾ = H_L + Δ̂_a + Δ̂_b,   𝒱̂ = P̂ − Q̂ + P̂† − Q̂†

where P̂ carries the co-rotating two-photon coupling with ĉ = b̂†â and Q̂ the
counter-rotating one with ĉ†.  An instantaneous pulse of area 𝒜 and strength
Γ acts for the time ϑ = 𝒜/Γ, and is approximated by

  Û = [cos(ϑΩ̂) − i sin(ϑΩ̂) Ω̂⁻¹ 𝒱̂] · exp(−iϑH₀⁽²⁾)

with the Rabi operator Ω̂ = √𝒱̂², where 𝒱̂² keeps only the products that do
not oscillate at optical frequencies.
"""

#-------------------------------------------------------------------------------

import collections
import itertools
import logging
import math

import numpy as np
import scipy.linalg

from   .exc import DomainError, ModelInconsistencyError
from   .lambda_model import RELEVANT, build_light_hamiltonian, self_couplings
from   .lib.memo import memoize_method
from   .lib.py import format_ctor
from   .spaces import OperatorMatrix, PlaneWave, Sampled, StateVector
from   .spaces import cosine, matrix_function, propagator, sinc

LOG = logging.getLogger(__name__)

# Eigenvalues of 𝒱̂² below −NEGATIVE_TOLERANCE·‖𝒱̂²‖ are inconsistent.
NEGATIVE_TOLERANCE = 1e-8
# Eigenvalues below CLAMP_TOLERANCE·‖𝒱̂²‖ are taken as zero.
CLAMP_TOLERANCE = 1e-10
UNITARITY_TOLERANCE = 1e-6

# Products in 𝒱̂² that survive the approximation.
KEPT_PRODUCTS = frozenset({"PP", "P†P†", "PP†", "P†P", "QQ†", "Q†Q"})

#-------------------------------------------------------------------------------

class PulseSpec(collections.namedtuple("PulseSpec", ("area", "strength", "instant"))):
    """
    An instantaneous pulse.

    @ivar area
      The pulse area 𝒜.
    @ivar strength
      The strength Γ; positive.
    @ivar instant
      The time t′ at which the pulse acts; the state is prepared at t = 0
      and evolves under H₀⁽²⁾ until then.
    """

    def __new__(class_, area, strength=1.0, instant=0.0):
        if not strength > 0:
            raise DomainError("pulse strength must be positive", strength)
        if not area >= 0:
            raise DomainError("pulse area must be non-negative", area)
        return super().__new__(class_, float(area), float(strength), float(instant))


    @classmethod
    def from_theta(class_, theta, strength=1.0, instant=0.0):
        return class_(theta * strength, strength, instant)


    def __repr__(self):
        return format_ctor(self, self.area, self.strength, self.instant)


    @property
    def theta(self):
        return self.area / self.strength



#-------------------------------------------------------------------------------
# Two-photon couplings

def _add(f, g):
    if f is None:
        return g
    if isinstance(f, PlaneWave) and isinstance(g, PlaneWave):
        if f.amplitude == 0:
            return g
        if g.amplitude == 0 or math.isclose(f.k, g.k):
            return PlaneWave(f.amplitude + g.amplitude, f.k)
        raise DomainError("two-photon paths carry different momenta", (f.k, g.k))
    if isinstance(f, Sampled) and isinstance(g, Sampled):
        return Sampled(f.values_ + g.values_)
    raise DomainError("cannot add plane-wave and sampled couplings")


def two_photon_couplings(model):
    """
    Returns the effective two-photon couplings summed over the ancillas,

      Ω(R) = Σ_j Ω*_jb Ω_ja / ω⁺_jjab      (carries +K)
      Λ(R) = Σ_j Λ_jb Λ*_ja / Ω⁺_jjab      (carries −K)

    @return
      `(omega, lambda_)`, each a `PlaneWave` or `Sampled`.
    """
    couplings = model.couplings
    detunings = model.detunings
    omega = lambda_ = None
    for j in model.levels.ancillas:
        inv_s = detunings.inverse("slow", j, j, "a", "b")
        inv_f = detunings.inverse("fast", j, j, "a", "b")
        omega = _add(omega, couplings.omega(j, "b").conj() * couplings.omega(j, "a") * inv_s)
        lambda_ = _add(
            lambda_,
            couplings.lambda_conj(j, "b") * couplings.lambda_conj(j, "a").conj() * inv_f)
    if omega is None:
        omega = lambda_ = PlaneWave(0j, couplings.recoil)
    return omega, lambda_


def _phase(fn):
    if isinstance(fn, PlaneWave):
        return float(np.angle(fn.amplitude))
    return np.angle(fn.values_)


class JointOperators:
    """
    Two-photon operators of the light and the atoms.

    @ivar c
      ĉ = b̂†â on the light space.
    @ivar c_dag
      ĉ† = â†b̂.
    @ivar n_c
      n̂_c = n̂_a(n̂_b + 1).
    @ivar psi_c
      ψ̂†_b ψ̂_a on the atomic Fock space, moving a(κ) to b(κ + K).
    @ivar omega
      The co-rotating two-photon coupling Ω(R).
    @ivar lambda_
      The counter-rotating two-photon coupling Λ(R).
    """

    def __init__(self, model):
        light = model.light
        self.c = light.creation("b") @ light.annihilation("a")
        self.c_dag = self.c.dag()
        self.n_c = OperatorMatrix(
            light.number("a").matrix @ (light.number("b") + light.identity()).matrix,
            light, hermitian=True)
        shift = model.modes.multiplication(PlaneWave(1.0, model.couplings.recoil), "b", "a")
        self.psi_c = model.bilinear(shift, "b", "a")
        self.psi_c_dag = self.psi_c.conj().T
        self.omega, self.lambda_ = two_photon_couplings(model)
        self.light = light


    def __repr__(self):
        return format_ctor(self, self.omega, self.lambda_)


    @property
    def phi_omega(self):
        return _phase(self.omega)


    @property
    def phi_lambda(self):
        return _phase(self.lambda_)


    def commutator_defect(self):
        """
        Returns ‖[ĉ, ĉ†] − (n̂_b − n̂_a)‖_max over light states with both
        photon numbers below the truncation edge.
        """
        light = self.light
        comm = self.c.comm(self.c_dag).matrix
        expected = (light.number("b") - light.number("a")).matrix
        n_a, n_b = light.photon_numbers()
        inner = np.flatnonzero(
            (n_a < light.ladder_a.n_max) & (n_b < light.ladder_b.n_max))
        diff = (comm - expected)[np.ix_(inner, inner)]
        return float(np.max(np.abs(diff))) if diff.size else 0.0



#-------------------------------------------------------------------------------
# The reduced Hamiltonian

class V2Approximation(collections.namedtuple("V2Approximation", ("op", "dropped"))):
    """
    The approximated 𝒱̂², and the products it leaves out.

    @ivar dropped
      Tuple of `DroppedProduct`.
    """



class DroppedProduct(collections.namedtuple("DroppedProduct", ("name", "norm"))):
    """
    A product of 𝒱̂² omitted from the approximation, with its Frobenius norm.
    """



class ReducedHamiltonian:
    """
    The Rabi block of the effective Hamiltonian together with the light.

    @ivar model
      The `LambdaModel` it is reduced from.
    @ivar H0
      H₀⁽²⁾, the diagonal part with the light.
    @ivar P
      The co-rotating coupling, Ω-block ⊗ ĉ.
    @ivar Q
      The counter-rotating coupling, Λ-block ⊗ ĉ†.
    @ivar joint
      The `JointOperators`.
    """

    def __init__(self, model, H0, P, Q):
        self.model = model
        self.H0 = H0
        self.P = P
        self.Q = Q
        self.joint = JointOperators(model)


    def __repr__(self):
        return f"ReducedHamiltonian(<{self.space.dim}>, rwa={self.model.couplings.rwa})"


    @property
    def space(self):
        return self.H0.space


    @memoize_method
    def V(self):
        return OperatorMatrix(
            (self.P - self.Q + self.P.dag() - self.Q.dag()).matrix, self.space,
            hermitian=True)


    @memoize_method
    def H_R(self):
        return self.H0 + self.V()


    def factors(self):
        """
        The four signed factors of 𝒱̂, by name.
        """
        return {"P": self.P, "Q": -self.Q, "P†": self.P.dag(), "Q†": -self.Q.dag()}


    @memoize_method
    def products(self):
        """
        The sixteen products that make up 𝒱̂², by name.
        """
        factors = self.factors()
        return {
            x + y: factors[x] @ factors[y]
            for x, y in itertools.product(factors, repeat=2)
        }


    @memoize_method
    def V2_approx(self):
        return build_V2_approx(self)


    @memoize_method
    def rabi(self):
        return rabi_operator(self.V2_approx().op)



def reduce_model(model):
    """
    Reduces a model to its Rabi block.

    @rtype
      `ReducedHamiltonian`.
    @raise SingularDetuningError
      A detuning is zero.
    """
    detunings = model.detunings
    light = model.light
    deltas = self_couplings(model)
    H0 = build_light_hamiltonian(model) + deltas["a"] + deltas["b"]
    H0 = OperatorMatrix(H0.matrix, model.basis, hermitian=True)

    shape = (model.modes.n_modes("b"), model.modes.n_modes("a"))
    omega_block = np.zeros(shape, dtype=complex)
    lambda_block = np.zeros(shape, dtype=complex)
    for j in model.levels.ancillas:
        omega_block += (
            detunings.inverse("slow", j, j, "a", "b")
            * model.co_block(j, "b").conj().T @ model.co_block(j, "a"))
        lambda_block += (
            detunings.inverse("fast", j, j, "a", "b")
            * model.counter_block(j, "b") @ model.counter_block(j, "a").conj().T)

    c = light.creation("b").matrix @ light.annihilation("a").matrix
    P = model.operator(model.bilinear(omega_block, "b", "a"), c)
    Q = model.operator(model.bilinear(lambda_block, "b", "a"), c.conj().T)
    LOG.info(f"reduced model to the Rabi block on {model.basis.dim} states")
    return ReducedHamiltonian(model, H0, P, Q)


def build_V(reduced):
    """
    Returns 𝒱̂ = P̂ − Q̂ + h.c., the off-diagonal part of H_R.
    """
    return reduced.V()


def build_V2_full(reduced):
    V = reduced.V()
    return OperatorMatrix((V @ V).matrix, reduced.space, hermitian=True)


def build_V2_approx(reduced):
    """
    Returns 𝒱̂² without the products that mix the co- and counter-rotating
    couplings, and without the ĉ†² and ĉ² counter-rotating products.

    @rtype
      `V2Approximation`.
    """
    kept = np.zeros((reduced.space.dim, ) * 2, dtype=complex)
    dropped = []
    for name, product in reduced.products().items():
        if name in KEPT_PRODUCTS:
            kept += product.matrix
        else:
            norm = product.norm()
            if norm > 0:
                LOG.debug(f"dropped product {name} with norm {norm:.3e}")
            dropped.append(DroppedProduct(name, norm))
    op = OperatorMatrix(kept, reduced.space).hermitized()
    return V2Approximation(op, tuple(dropped))


def rabi_operator(V2):
    """
    Returns the Rabi operator Ω̂ = √𝒱̂².

    @param V2
      A hermitian `OperatorMatrix` or a `V2Approximation`.
    @raise ModelInconsistencyError
      𝒱̂² has a significantly negative eigenvalue.
    """
    if isinstance(V2, V2Approximation):
        V2 = V2.op
    values, vectors = scipy.linalg.eigh(V2.matrix)
    scale = float(np.max(np.abs(values))) if len(values) else 0.0
    lowest = float(values.min()) if len(values) else 0.0
    if lowest < -NEGATIVE_TOLERANCE * scale:
        raise ModelInconsistencyError(lowest, scale)
    if lowest < -CLAMP_TOLERANCE * scale:
        LOG.warning(f"clamping negative eigenvalue {lowest:.3e} of V²")
    roots = np.sqrt(np.where(values < CLAMP_TOLERANCE * scale, 0, values))
    return OperatorMatrix(
        (vectors * roots) @ vectors.conj().T, V2.space, hermitian=True)


#-------------------------------------------------------------------------------
# Pulses

class PulseOperator(collections.namedtuple(
        "PulseOperator", ("U", "pulse", "unitarity_defect", "method"))):
    """
    The propagator of a pulse.

    @ivar U
      The `OperatorMatrix`.
    @ivar unitarity_defect
      ‖U†U − 1‖_max.
    @ivar method
      `"delta"` or `"exact"`.
    """

    def __repr__(self):
        return (
            f"PulseOperator({self.pulse!r}, method={self.method!r}, "
            f"unitarity_defect={self.unitarity_defect:.1e})")


    @property
    def matrix(self):
        return self.U.matrix


    def apply(self, psi):
        if psi.space is not self.U.space and psi.space != self.U.space:
            raise DomainError("state and pulse live on different spaces")
        return StateVector(self.U.matrix @ psi.amplitudes, psi.space)



def unitarity_defect(matrix):
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(len(matrix)))))


def _pulse_operator(matrix, pulse, space, method):
    defect = unitarity_defect(matrix)
    if defect > UNITARITY_TOLERANCE:
        LOG.warning(f"{method} pulse U is not unitary: defect {defect:.3e}")
    return PulseOperator(OperatorMatrix(matrix, space), pulse, defect, method)


def _wait(U, pulse, reduced):
    """
    Prepends free evolution exp(−it′H₀⁽²⁾) from preparation at t = 0 to the
    pulse instant t′.
    """
    if pulse.instant == 0:
        return U
    return U @ matrix_function(reduced.H0, propagator(pulse.instant)).matrix


def delta_pulse_U(pulse, reduced):
    """
    Returns the delta-pulse propagator

      Û = [cos(ϑΩ̂) − i sinc_ϑ(Ω̂) 𝒱̂] · exp(−iϑH₀⁽²⁾)

    with sinc_ϑ(x) = sin(ϑx)/x and sinc_ϑ(0) = ϑ.  The result is not
    renormalized; its unitarity defect is recorded.  A pulse at t′ ≠ 0 is
    preceded by exp(−it′H₀⁽²⁾).

    @type pulse
      `PulseSpec`.
    @type reduced
      `ReducedHamiltonian`.
    @rtype
      `PulseOperator`.
    """
    theta = pulse.theta
    rabi = reduced.rabi()
    even = matrix_function(rabi, cosine(theta)).matrix
    odd = matrix_function(rabi, sinc(theta)).matrix
    free = matrix_function(reduced.H0, propagator(theta)).matrix
    U = (even - 1j * odd @ reduced.V().matrix) @ free
    return _pulse_operator(_wait(U, pulse, reduced), pulse, reduced.space, "delta")


def exact_pulse_U(pulse, reduced):
    """
    Returns exp(−iϑH_R) from the spectral decomposition of H_R.
    """
    U = matrix_function(reduced.H_R(), propagator(pulse.theta)).matrix
    return _pulse_operator(_wait(U, pulse, reduced), pulse, reduced.space, "exact")


#-------------------------------------------------------------------------------
# Center-of-mass phases

class GaussianAmplitude(collections.namedtuple(
        "GaussianAmplitude", ("sigma", "kappa", "dimension"))):
    """
    The wave packet f(R) = 𝒩 exp(−R²/2σ² + iκ·R), normalized in d dimensions
    with 𝒩 = (πσ²)^(−d/4).

    In three dimensions, `kappa` and R are taken along one axis.
    """

    def __new__(class_, sigma, kappa=0.0, dimension=1):
        if not sigma > 0:
            raise DomainError("width must be positive", sigma)
        if dimension not in (1, 3):
            raise DomainError("dimension must be 1 or 3", dimension)
        return super().__new__(class_, float(sigma), float(kappa), int(dimension))


    def __repr__(self):
        return format_ctor(self, self.sigma, self.kappa, self.dimension)


    @property
    def normalization(self):
        return (math.pi * self.sigma ** 2) ** (-self.dimension / 4)


    def values(self, R):
        """
        f at radial positions `R`, with the carrier along R.
        """
        R = np.asarray(R, dtype=float)
        return self.normalization * np.exp(
            -R ** 2 / (2 * self.sigma ** 2) + 1j * self.kappa * R)


    def momentum_weights(self, kappas):
        """
        Relative Fourier amplitudes exp(−σ²(q − κ)²/2) at one-dimensional
        momenta `kappas`, not normalized.
        """
        q = np.asarray(kappas, dtype=float)
        return np.exp(-self.sigma ** 2 * (q - self.kappa) ** 2 / 2).astype(complex)



def gaussian_com_energy(amp, R, mass):
    """
    Returns 𝓔_COM(R) = (𝓗_COM f)(R) / f(R) for a Gaussian amplitude,

      𝓔_COM = −(1/2M)(R² − 2iσ²κR − dσ² − σ⁴κ²) / σ⁴

    which is zero for infinite mass.
    """
    if math.isinf(mass):
        return np.zeros_like(np.asarray(R, dtype=complex))
    s2 = amp.sigma ** 2
    R = np.asarray(R, dtype=float)
    k = amp.kappa
    return -(R ** 2 - 2j * s2 * k * R - amp.dimension * s2 - s2 ** 2 * k ** 2) / (2 * mass * s2 ** 2)


def plane_wave_com_energy(kappa, mass):
    return 0.0 if math.isinf(mass) else kappa ** 2 / (2 * mass)


def phase_factor_C(n, alpha, amp, model, R=0.0):
    """
    Returns the phase 𝒞_{n,α}(R) an atom in level α acquires per unit time
    with photon numbers `n = (n_a, n_b)`,

      𝒞 = 𝓔_COM + Σ_α′ Ω_α′(n_α′ + ½) + ω_α
          + Σ_j |Ω_jα|²/Δ⁻_jα n_α − Σ_j |Λ_jα|²/Δ⁺_jα (n_α + 1)

    The counter-rotating term vanishes in the rotating-wave approximation.

    @param amp
      A `GaussianAmplitude`, or the momentum κ of a plane wave.
    @raise DomainError
      `alpha` is not a relevant level, or the couplings are not plane waves.
    """
    if alpha not in RELEVANT:
        raise DomainError("not a relevant level", alpha)
    couplings = model.couplings
    detunings = model.detunings
    photons = dict(zip(RELEVANT, n))

    mass = model.levels.mass
    if isinstance(amp, GaussianAmplitude):
        energy = complex(gaussian_com_energy(amp, R, mass))
    else:
        energy = complex(plane_wave_com_energy(float(amp), mass))

    light = sum(
        couplings.mode(a).frequency * (photons[a] + 0.5) for a in RELEVANT)
    shift = 0.0
    for j in model.levels.ancillas:
        omega, lambda_ = couplings.omega(j, alpha), couplings.lambda_conj(j, alpha)
        if not (isinstance(omega, PlaneWave) and isinstance(lambda_, PlaneWave)):
            raise DomainError("phase factor needs plane-wave couplings")
        shift += (
            detunings.inverse("slow", j, j, alpha, alpha)
            * omega.magnitude ** 2 * photons[alpha])
        shift -= (
            detunings.inverse("fast", j, j, alpha, alpha)
            * lambda_.magnitude ** 2 * (photons[alpha] + 1))
    return energy + light + model.levels.frequency(alpha) + shift


