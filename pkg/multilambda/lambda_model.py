"""
Multi-Λ atoms in a two-mode cavity.

The relevant levels a and b couple to every ancilla level j through the
photon mode of the same name.  In the Schrödinger picture

  H = H_A + H_L + H_AL

with the atomic part H_A = Σ_ℓ ∫ψ†_ℓ (𝓗_COM + ω_ℓ) ψ_ℓ, the light part
H_L = Σ_α Ω_α (n̂_α + ½), and the dipole coupling

  H_AL = Σ_jα ∫ ψ†_j Ω_jα(R) α̂ ψ_α + ψ†_α Λ*_jα(R) α̂ ψ_j  + h.c.

In the interaction picture with respect to G = H_int + H_L, the co-rotating
terms oscillate at the slow detunings Δ⁻_jα = Ω_α − (ω_j − ω_α) and the
counter-rotating terms at the fast detunings Δ⁺_jα = Ω_α + (ω_j − ω_α).

All orbital couplings are represented as blocks between the external modes
of two levels:

  co_block(j, α)       Ω_jα(R), from the modes of α to the modes of j
  counter_block(j, α)  Λ*_jα(R), from the modes of j to the modes of α

and lifted to the atomic Fock space as bilinears Σ M_pq a†_p a_q, which are
exact in every kept atom-number sector.
"""

#-------------------------------------------------------------------------------

import collections
import logging
import math

import numpy as np
import scipy.linalg

from   .averaging import HarmonicHamiltonian, inverse_detuning_sum, resonant
from   .exc import DomainError
from   .lib.memo import memoize_method
from   .lib.py import format_ctor
from   .spaces import MODE_LABELS, OperatorMatrix, PlaneWave, Sampled
from   .spaces import build_field_op

LOG = logging.getLogger(__name__)

# The relevant levels; each couples through the photon mode of the same name.
RELEVANT = MODE_LABELS

#-------------------------------------------------------------------------------
# Level scheme and couplings

class LevelScheme:
    """
    Internal levels: the relevant pair a, b and one or more ancillas.

    @ivar frequencies
      Mapping from level name to internal frequency ω_ℓ, relevant levels
      first.
    @ivar ancillas
      Tuple of ancilla level names, in order.
    @ivar mass
      The atomic mass; `math.inf` for atoms without kinetic energy.
    @ivar potentials
      Mapping from level name to external potential values on the grid.
    """

    def __init__(self, frequencies, *, mass=math.inf, potentials=None):
        frequencies = { str(l): float(w) for l, w in frequencies.items() }
        for level in RELEVANT:
            if level not in frequencies:
                raise DomainError("missing relevant level", level)
        ancillas = tuple( l for l in frequencies if l not in RELEVANT )
        if len(ancillas) == 0:
            raise DomainError("level scheme needs at least one ancilla")
        if not frequencies["b"] > frequencies["a"]:
            raise DomainError(
                "ω_b must exceed ω_a", (frequencies["a"], frequencies["b"]))
        if not mass > 0:
            raise DomainError("mass must be positive", mass)
        potentials = {} if potentials is None else dict(potentials)
        for level in potentials:
            if level not in frequencies:
                raise DomainError("potential for unknown level", level)

        self.frequencies = { l: frequencies[l] for l in RELEVANT + ancillas }
        self.ancillas = ancillas
        self.mass = float(mass)
        self.potentials = potentials

        for j in ancillas:
            if frequencies[j] <= frequencies["b"]:
                LOG.warning(f"ancilla {j} lies below level b")


    def __repr__(self):
        return format_ctor(self, self.frequencies, mass=self.mass)


    @property
    def levels(self):
        return RELEVANT + self.ancillas


    def frequency(self, level):
        try:
            return self.frequencies[level]
        except KeyError:
            raise DomainError("unknown level", level) from None



class OpticalMode(collections.namedtuple(
        "OpticalMode", ("label", "frequency", "amplitude", "k", "profile"))):
    """
    One cavity mode.

    @ivar frequency
      The mode frequency Ω_α.
    @ivar amplitude
      The field amplitude 𝓔_α.
    @ivar k
      The signed wave number of the plane-wave mode function e^{ikR}.
    @ivar profile
      Sampled mode function on the grid, or `None` for a plane wave.
    """

    def __new__(class_, label, frequency, amplitude=1.0, k=0.0, profile=None):
        if label not in MODE_LABELS:
            raise DomainError("unknown photon mode", label)
        if not frequency > 0:
            raise DomainError("mode frequency must be positive", frequency)
        if profile is not None:
            profile = np.asarray(profile, dtype=complex)
        return super().__new__(
            class_, label, float(frequency), float(amplitude), float(k), profile)


    def __repr__(self):
        return format_ctor(self, self.label, self.frequency, self.amplitude, self.k)


    def function(self):
        """
        The mode function u_α(R).
        """
        if self.profile is None:
            return PlaneWave(1.0, self.k)
        else:
            return Sampled(self.profile)



class Transition(collections.namedtuple(
        "Transition", ("ancilla", "level", "dipole", "phase"))):
    """
    A dipole-allowed transition between ancilla `ancilla` and relevant
    level `level`, with dipole magnitude |℘| and phase φ.
    """

    def __new__(class_, ancilla, level, dipole, phase=0.0):
        if level not in RELEVANT:
            raise DomainError("transition must end on a relevant level", level)
        if not dipole >= 0:
            raise DomainError("dipole magnitude must be non-negative", dipole)
        return super().__new__(class_, str(ancilla), level, float(dipole), float(phase))



class CouplingSet:
    """
    Co-rotating and counter-rotating couplings of all transitions.

      Ω_jα(R)  = −i 𝓔_α |℘_jα| e^{iφ_jα} u_α(R) / √2
      Λ*_jα(R) = −i 𝓔_α |℘_jα| e^{−iφ_jα} u_α(R) / √2

    @ivar rwa
      If true, the counter-rotating couplings Λ are dropped.
    @ivar co_rotating
      If false, the co-rotating couplings Ω are dropped.
    """

    def __init__(self, modes, transitions, *, rwa=False, co_rotating=True):
        if not isinstance(modes, dict):
            modes = { m.label: m for m in modes }
        for label in MODE_LABELS:
            if label not in modes:
                raise DomainError("missing photon mode", label)
        table = {}
        for t in transitions:
            key = (t.ancilla, t.level)
            if key in table:
                raise DomainError("duplicate transition", key)
            table[key] = t

        self.modes = modes
        self.transitions = table
        self.rwa = bool(rwa)
        self.co_rotating = bool(co_rotating)


    def __repr__(self):
        return (
            f"CouplingSet(<{len(self.transitions)} transitions>, "
            f"rwa={self.rwa}, co_rotating={self.co_rotating})")


    def mode(self, label):
        try:
            return self.modes[label]
        except KeyError:
            raise DomainError("unknown photon mode", label) from None


    @property
    def ancillas(self):
        return sorted({ j for j, _ in self.transitions })


    def strength(self, j, alpha):
        """
        Returns 𝓔_α |℘_jα| e^{iφ_jα} / √2, or zero without a transition.
        """
        t = self.transitions.get((j, alpha))
        if t is None:
            return 0j
        return self.mode(alpha).amplitude * t.dipole * np.exp(1j * t.phase) / math.sqrt(2)


    def omega(self, j, alpha):
        """
        The co-rotating coupling Ω_jα(R).
        """
        c = self.strength(j, alpha) if self.co_rotating else 0j
        return self.mode(alpha).function() * (-1j * c)


    def lambda_conj(self, j, alpha):
        """
        The conjugate counter-rotating coupling Λ*_jα(R).
        """
        c = 0j if self.rwa else np.conj(self.strength(j, alpha))
        return self.mode(alpha).function() * (-1j * c)


    @property
    def recoil(self):
        """
        The two-photon momentum transfer K = k_a − k_b of a → b.
        """
        return self.mode("a").k - self.mode("b").k



class DetuningTable:
    """
    Single-photon detunings and their aggregate inverses.

      Δ±_jα = Ω_α ± (ω_j − ω_α)
      1/ω+_jkαβ = ½(1/Δ−_jα + 1/Δ−_kβ)    (slow, co-rotating)
      1/Ω+_jkαβ = ½(1/Δ+_jα + 1/Δ+_kβ)    (fast, counter-rotating)

    @ivar minus
      Mapping (j, α) → Δ⁻_jα.
    @ivar plus
      Mapping (j, α) → Δ⁺_jα.
    """

    def __init__(self, levels, couplings):
        self.minus = {}
        self.plus = {}
        for j in levels.ancillas:
            for alpha in RELEVANT:
                Omega = couplings.mode(alpha).frequency
                omega = levels.frequency(j) - levels.frequency(alpha)
                self.minus[(j, alpha)] = Omega - omega
                self.plus[(j, alpha)] = Omega + omega
        self.mode_frequencies = {
            a: couplings.mode(a).frequency for a in RELEVANT }
        self.level_frequencies = dict(levels.frequencies)


    def __repr__(self):
        return f"DetuningTable(minus={self.minus!r}, plus={self.plus!r})"


    def detuning(self, domain, j, alpha):
        if domain == "slow":
            return self.minus[(j, alpha)]
        elif domain == "fast":
            return self.plus[(j, alpha)]
        else:
            raise DomainError("unknown frequency domain", domain)


    def inverse(self, domain, j, k, alpha, beta):
        """
        Returns 1/ω⁺_jkαβ (slow) or 1/Ω⁺_jkαβ (fast).

        @raise SingularDetuningError
          A detuning is zero.
        """
        return inverse_detuning_sum(
            self.detuning(domain, j, alpha), self.detuning(domain, k, beta), +1)


    def aggregate(self, domain, j, k, alpha, beta):
        """
        Returns ω⁺_jkαβ or Ω⁺_jkαβ itself; infinite where the inverse vanishes.
        """
        inverse = self.inverse(domain, j, k, alpha, beta)
        return math.inf if inverse == 0 else 1 / inverse


    def two_photon(self, sign):
        """
        Returns the two-photon detuning δ±_ab = Ω_b − Ω_a ± (ω_b − ω_a).
        """
        s = {"+": 1, "-": -1, 1: 1, -1: -1}.get(sign)
        if s is None:
            raise DomainError("sign must be ±", sign)
        return (
            self.mode_frequencies["b"] - self.mode_frequencies["a"]
            + s * (self.level_frequencies["b"] - self.level_frequencies["a"]))



#-------------------------------------------------------------------------------
# The model

class LambdaModel:
    """
    A level scheme, its couplings, and the composite basis they act on.

    @ivar levels
      The `LevelScheme`.
    @ivar couplings
      The `CouplingSet`.
    @ivar basis
      The `CompositeBasis`.
    @ivar detunings
      The `DetuningTable`.
    @ivar pairs
      Tuple of `(j, α)` for every ancilla and relevant level, in term order.
    """

    def __init__(self, levels, couplings, basis):
        mode_levels = set(basis.modes.levels)
        if mode_levels != set(levels.levels):
            raise DomainError(
                "basis levels differ from level scheme",
                (sorted(mode_levels), sorted(levels.levels)))
        for j, alpha in couplings.transitions:
            if j not in levels.ancillas:
                raise DomainError("transition references absent ancilla", j)
        if basis.modes.backend == "ladder":
            for label in MODE_LABELS:
                if couplings.mode(label).profile is not None:
                    raise DomainError("sampled mode function needs the grid backend", label)

        self.levels = levels
        self.couplings = couplings
        self.basis = basis
        self.detunings = DetuningTable(levels, couplings)
        self.pairs = tuple( (j, a) for j in levels.ancillas for a in RELEVANT )


    def __repr__(self):
        return format_ctor(self, self.levels, self.couplings, self.basis)


    @property
    def modes(self):
        return self.basis.modes


    @property
    def light(self):
        return self.basis.light


    @memoize_method
    def co_block(self, j, alpha):
        """
        Ω_jα(R) between external modes, shape `(n_j, n_α)`.
        """
        return self.modes.multiplication(self.couplings.omega(j, alpha), j, alpha)


    @memoize_method
    def counter_block(self, j, alpha):
        """
        Λ*_jα(R) between external modes, shape `(n_α, n_j)`.
        """
        return self.modes.multiplication(self.couplings.lambda_conj(j, alpha), alpha, j)


    @memoize_method
    def com_block(self, level):
        """
        𝓗_COM on the modes of `level`.
        """
        return self.modes.kinetic(
            level, self.levels.mass, self.levels.potentials.get(level))


    def h0_block(self, level):
        """
        𝓗_COM + ω_ℓ on the modes of `level`.
        """
        n = self.modes.n_modes(level)
        return self.com_block(level) + self.levels.frequency(level) * np.eye(n)


    def bilinear(self, block, to_level, from_level):
        """
        Lifts a block between the modes of two levels to the atomic Fock space.
        """
        full = self.modes.embed_block(block, to_level, from_level)
        return self.basis.atoms.bilinear(full)


    def operator(self, atom_matrix, light_matrix=None, *, hermitian=False):
        if light_matrix is None:
            light_matrix = np.eye(self.light.dim)
        return self.basis.operator(atom_matrix, light_matrix, hermitian=hermitian)


    def zero(self):
        return OperatorMatrix(np.zeros((self.basis.dim, self.basis.dim)), self.basis, hermitian=True)


    def is_resonant(self, domain, m, n):
        f_m = self.detunings.detuning(domain, *m)
        f_n = self.detunings.detuning(domain, *n)
        return m == n or resonant(f_m, f_n, self.frequency_scale)


    @property
    def frequency_scale(self):
        return max(
            abs(f) for f in
            list(self.detunings.minus.values()) + list(self.detunings.plus.values()))



def raman_ladder(levels, couplings, *, kappa0=0.0, steps=2, counter=True):
    """
    Returns the momentum labels per level reachable from level a at `kappa0`
    in up to `steps` single-photon processes.  `kappa0` may also be a
    sequence of start momenta.

    Co-rotating absorption on α → j adds k_α; counter-rotating processes on
    the same leg subtract it.

    @return
      Mapping from level name to a sorted list of momenta, suitable for
      `AtomicModeSet.ladder`.
    """
    k = { a: couplings.mode(a).k for a in RELEVANT }
    found = { l: set() for l in levels.levels }
    starts = { round(float(s), 9) for s in np.atleast_1d(kappa0) }
    found["a"].update(starts)
    frontier = { ("a", s) for s in starts }
    for _ in range(steps):
        following = set()
        for level, kappa in frontier:
            if level in RELEVANT:
                shifts = [ k[level] ] + ([ -k[level] ] if counter else [])
                targets = [ (j, s) for j in levels.ancillas for s in shifts ]
            else:
                targets = [
                    (a, s) for a in RELEVANT
                    for s in [ -k[a] ] + ([ k[a] ] if counter else []) ]
            for target, shift in targets:
                reached = round(kappa + shift, 9)
                if reached not in found[target]:
                    found[target].add(reached)
                    following.add((target, reached))
        frontier = following
    return { l: sorted(ks) for l, ks in found.items() }


#-------------------------------------------------------------------------------
# Schrödinger-picture Hamiltonian

def build_light_hamiltonian(model):
    """
    H_L = Σ_α Ω_α (n̂_α + ½).
    """
    light = model.light
    matrix = sum(
        model.couplings.mode(a).frequency
        * (light.number(a).matrix + 0.5 * np.eye(light.dim))
        for a in RELEVANT
    )
    return model.operator(np.eye(model.basis.atoms.dim), matrix, hermitian=True)


def build_internal_hamiltonian(model):
    """
    H_int = Σ_ℓ ω_ℓ N̂_ℓ.
    """
    atoms = sum(
        model.bilinear(
            model.levels.frequency(l) * np.eye(model.modes.n_modes(l)), l, l)
        for l in model.levels.levels
    )
    return model.operator(atoms, hermitian=True)


def build_com_hamiltonian(model):
    """
    H_COM = Σ_ℓ ∫ψ†_ℓ 𝓗_COM ψ_ℓ, including any external potentials.
    """
    atoms = sum(
        model.bilinear(model.com_block(l), l, l)
        for l in model.levels.levels
    )
    return model.operator(atoms, hermitian=True)


def build_atomic_hamiltonian(model):
    return build_internal_hamiltonian(model) + build_com_hamiltonian(model)


def _h_op(model, j, alpha):
    a = model.light.annihilation(alpha).matrix
    return model.operator(model.bilinear(model.co_block(j, alpha), j, alpha), a)


def _g_op(model, j, alpha):
    a = model.light.annihilation(alpha).matrix
    return model.operator(model.bilinear(model.counter_block(j, alpha), alpha, j), a)


def build_dipole_hamiltonian(model):
    """
    Builds the dipole coupling H_AL in the Schrödinger picture.

    Polarization selection is structural: mode a only drives a ↔ j, and
    mode b only drives b ↔ j.

    @rtype
      `OperatorMatrix`, hermitian.
    """
    X = np.zeros((model.basis.dim, model.basis.dim), dtype=complex)
    for j, alpha in model.pairs:
        X += _h_op(model, j, alpha).matrix
        X += _g_op(model, j, alpha).matrix
    return OperatorMatrix(X + X.conj().T, model.basis, hermitian=True)


def schrodinger_hamiltonian(model):
    return (
        build_atomic_hamiltonian(model)
        + build_light_hamiltonian(model)
        + build_dipole_hamiltonian(model))


def to_interaction_picture(model):
    """
    Transforms the full Hamiltonian into the interaction picture with respect
    to G = H_int + H_L.

    The slow terms are h_jα = ∫ψ†_j Ω_jα ψ_α ⊗ α̂ at frequency Δ⁻_jα; the
    fast terms are g_jα = ∫ψ†_α Λ*_jα ψ_j ⊗ α̂ at frequency Δ⁺_jα.  The
    time-independent part is H_COM, which commutes with G.

    @rtype
      `HarmonicHamiltonian` with its frame attached.
    @raise SingularDetuningError
      A single-photon detuning is zero.
    """
    slow = [
        (_h_op(model, j, a), model.detunings.minus[(j, a)], ("h", j, a))
        for j, a in model.pairs ]
    fast = [
        (_g_op(model, j, a), model.detunings.plus[(j, a)], ("g", j, a))
        for j, a in model.pairs ]
    frame = build_internal_hamiltonian(model) + build_light_hamiltonian(model)
    h = HarmonicHamiltonian(
        build_com_hamiltonian(model), slow, fast, hc_sign=+1, frame=frame)
    LOG.debug(f"interaction picture: {h!r}")
    return h


#-------------------------------------------------------------------------------
# Commutator evaluation

class CommutatorTerm(collections.namedtuple(
        "CommutatorTerm", ("domain", "m", "n", "relevant", "ancilla", "pair"))):
    """
    The decomposition of one commutator [h†_m, h_n] (or [g†_m, g_n]).

    @ivar m
      The `(k, β)` label of the adjoint term.
    @ivar n
      The `(j, α)` label of the other term.
    @ivar relevant
      The two-operator term acting on relevant levels.
    @ivar ancilla
      The two-operator term acting on ancilla levels.
    @ivar pair
      The four-operator particle-particle term, normal ordered.
    """

    def __repr__(self):
        return f"CommutatorTerm({self.domain!r}, {self.m!r}, {self.n!r})"


    @property
    def total(self):
        return self.relevant + self.ancilla + self.pair



def _commutator_term(model, domain, m, n):
    (k, beta), (j, alpha) = m, n
    light = model.light
    zero = np.zeros((model.basis.atoms.dim, model.basis.atoms.dim))
    bd_a = light.creation(beta).matrix @ light.annihilation(alpha).matrix
    a_bd = light.annihilation(alpha).matrix @ light.creation(beta).matrix

    if domain == "slow":
        left = model.bilinear(model.co_block(k, beta).conj().T, beta, k)
        right = model.bilinear(model.co_block(j, alpha), j, alpha)
        relevant = (
            model.bilinear(model.co_block(k, beta).conj().T @ model.co_block(j, alpha), beta, alpha)
            if j == k else zero)
        ancilla = (
            -model.bilinear(model.co_block(j, alpha) @ model.co_block(k, alpha).conj().T, j, k)
            if alpha == beta else zero)
        contraction = relevant
    else:
        left = model.bilinear(model.counter_block(k, beta).conj().T, k, beta)
        right = model.bilinear(model.counter_block(j, alpha), alpha, j)
        ancilla = (
            model.bilinear(model.counter_block(k, alpha).conj().T @ model.counter_block(j, alpha), k, j)
            if alpha == beta else zero)
        relevant = (
            -model.bilinear(model.counter_block(j, alpha) @ model.counter_block(j, beta).conj().T, alpha, beta)
            if j == k else zero)
        contraction = ancilla

    if alpha == beta:
        pair = model.operator(left @ right - contraction, bd_a - a_bd)
    else:
        pair = model.operator(zero, np.zeros_like(bd_a))

    # Slow pairs: the relevant term carries β̂†α̂, the ancilla term α̂β̂†.
    # Fast pairs: the other way round.
    if domain == "slow":
        relevant, ancilla = model.operator(relevant, bd_a), model.operator(ancilla, a_bd)
    else:
        relevant, ancilla = model.operator(relevant, a_bd), model.operator(ancilla, bd_a)
    return CommutatorTerm(domain, m, n, relevant, ancilla, pair)


def evaluate_commutators(model, domains=("slow", "fast")):
    """
    Decomposes every commutator [h†_m, h_n] and [g†_m, g_n] into its
    delta-contracted two-operator terms and the four-operator
    particle-particle term.

    For the co-rotating terms,

      [h†_kβ, h_jα] = δ_jk B_β(Ω*_kβ Ω_jα)_α β̂†α̂ − δ_αβ B_j(Ω_jα Ω*_kα)_k α̂α̂†
                      + δ_αβ :B_α(Ω*_kα)_k B_j(Ω_jα)_α: [α̂†, α̂]

    and analogously for the counter-rotating terms.

    @return
      List of `CommutatorTerm`, one per ordered pair in each domain.
    """
    terms = []
    for domain in domains:
        for m in model.pairs:
            for n in model.pairs:
                terms.append(_commutator_term(model, domain, m, n))
    LOG.debug(f"evaluated {len(terms)} commutators")
    return terms


#-------------------------------------------------------------------------------
# Energy shifts

class ShiftOperator:
    """
    A field-induced energy shift,

      Σ_jα w_jα |c_jα(R)|² L̂_α

    where c is Ω (co-rotating, AC-Stark) or Λ (counter-rotating,
    Bloch-Siegert), and L̂_α is n̂_α, or 𝟙 = [α̂, α̂†] for the vacuum part.

    On a level ℓ the density |c_jα(R)|² is realized by the coupling blocks
    through the intermediate level, so that truncated mode sets stay exact:
    c†c on ℓ = α and cc† on ℓ = j for co-rotating couplings, and the reverse
    for counter-rotating ones.
    """

    KINDS = ("co", "counter")

    def __init__(self, model, kind, weights, *, vacuum=False):
        if kind not in self.KINDS:
            raise DomainError("unknown shift kind", kind)
        self.model = model
        self.kind = kind
        self.weights = dict(weights)
        self.vacuum = bool(vacuum)


    def __repr__(self):
        return (
            f"ShiftOperator({self.kind!r}, <{len(self.weights)} terms>, "
            f"vacuum={self.vacuum})")


    def coupling(self, j, alpha):
        c = self.model.couplings
        return c.omega(j, alpha) if self.kind == "co" else c.lambda_conj(j, alpha)


    def density(self, j, alpha, level):
        """
        The block of |c_jα(R)|² on the modes of `level`.
        """
        model = self.model
        if self.kind == "co":
            block = model.co_block(j, alpha)
            if level == alpha:
                return block.conj().T @ block
            if level == j:
                return block @ block.conj().T
        else:
            block = model.counter_block(j, alpha)
            if level == alpha:
                return block @ block.conj().T
            if level == j:
                return block.conj().T @ block
        fn = self.coupling(j, alpha)
        return model.modes.multiplication(model.modes.product(fn, fn.conj()), level, level)


    def _light(self, alpha):
        light = self.model.light
        return (light.unit(alpha) if self.vacuum else light.number(alpha)).matrix


    def on(self, level):
        """
        The shift acting on atoms in `level`.

        @rtype
          `OperatorMatrix`, hermitian.
        """
        model = self.model
        matrix = np.zeros((model.basis.dim, model.basis.dim), dtype=complex)
        for (j, alpha), w in self.weights.items():
            if w == 0:
                continue
            atoms = model.bilinear(self.density(j, alpha, level), level, level)
            matrix += w * np.kron(atoms, self._light(alpha))
        return OperatorMatrix(matrix, model.basis, hermitian=True)


    def value(self, n_a=0, n_b=0):
        """
        The shift for photon numbers `(n_a, n_b)` with plane-wave couplings,
        using |c_jα|² from the coupling magnitudes.
        """
        n = {"a": n_a, "b": n_b}
        total = 0.0
        for (j, alpha), w in self.weights.items():
            photons = 1 if self.vacuum else n[alpha]
            total += w * self.coupling(j, alpha).magnitude ** 2 * photons
        return total



class ShiftPair(collections.namedtuple("ShiftPair", ("shift", "vacuum"))):
    """
    A photon-number-dependent shift and its vacuum part.
    """



def _sign(sign):
    if sign in (+1, "+"):
        return +1
    elif sign in (-1, "-"):
        return -1
    else:
        raise DomainError("sign must be ±", sign)


def _shift_pair(model, kind, domain, sign, ancilla):
    s = _sign(sign)
    if ancilla is None:
        ancillas = model.levels.ancillas
    elif ancilla in model.levels.ancillas:
        ancillas = (ancilla, )
    else:
        raise DomainError("unknown ancilla", ancilla)
    weights = {}
    for j in ancillas:
        weights[(j, "a")] = model.detunings.inverse(domain, j, j, "a", "a")
        weights[(j, "b")] = s * model.detunings.inverse(domain, j, j, "b", "b")
    return ShiftPair(
        ShiftOperator(model, kind, weights),
        ShiftOperator(model, kind, weights, vacuum=True))


def ac_stark(model, sign="+", ancilla=None):
    """
    Returns the quantum AC-Stark shift and its vacuum part,

      Ω̂±_AC = Σ_j |Ω_ja|²/ω⁺_jjaa n̂_a ± |Ω_jb|²/ω⁺_jjbb n̂_b

    summed over all ancillas, or for a single `ancilla`.

    @rtype
      `ShiftPair`.
    @raise SingularDetuningError
      A co-rotating detuning is zero.
    """
    return _shift_pair(model, "co", "slow", sign, ancilla)


def bloch_siegert(model, sign="+", ancilla=None):
    """
    Returns the lowest-order quantum Bloch-Siegert shift and its vacuum
    part, as `ac_stark` with Λ couplings and Ω⁺_jjαα denominators.
    """
    return _shift_pair(model, "counter", "fast", sign, ancilla)


#-------------------------------------------------------------------------------
# Couplings of the effective Hamiltonian

class DenominatorRecord(collections.namedtuple(
        "DenominatorRecord", ("term", "ancilla", "kind", "domain", "inverse"))):
    """
    Which aggregate detuning a coupling term uses.
    """



class DroppedTerm(collections.namedtuple(
        "DroppedTerm", ("domain", "m", "n", "combo"))):
    """
    A term pair removed by the low-pass filter.
    """



class Provenance(collections.namedtuple("Provenance", ("denominators", "dropped"))):

    def __repr__(self):
        return (
            f"Provenance(<{len(self.denominators)} denominators>, "
            f"<{len(self.dropped)} dropped>)")



class _PairFilter:
    """
    Decides which term pairs survive the low-pass filter, and records the
    ones that do not.
    """

    def __init__(self, model, filter):
        self.model = model
        self.filter = filter
        self.dropped = {}
        self.denominators = []


    def __call__(self, domain, m, n):
        if self.filter is None or m == n:
            return True
        if self.model.is_resonant(domain, m, n):
            combo = 0.0
        else:
            d = self.model.detunings
            combo = d.detuning(domain, *m) - d.detuning(domain, *n)
        if self.filter.keeps(combo):
            return True
        key = (domain, m, n)
        if key not in self.dropped:
            LOG.debug(f"dropped {domain} pair {m} {n} at {combo}")
            self.dropped[key] = DroppedTerm(domain, m, n, combo)
        return False


    def record(self, term, ancilla, kind, domain, inverse):
        LOG.debug(f"{term} {ancilla} {kind}: {domain} denominator, inverse {inverse}")
        self.denominators.append(DenominatorRecord(term, ancilla, kind, domain, inverse))


    @property
    def provenance(self):
        return Provenance(tuple(self.denominators), tuple(self.dropped.values()))



def _keep_all(domain, m, n):
    return True


def self_couplings(model, form="shifts"):
    """
    Returns the self couplings Δ̂_a, Δ̂_b, and Δ̂_j of every ancilla.

    With `form="shifts"`, they are composed of the AC-Stark and Bloch-Siegert
    shifts,

      Δ̂_a = 𝓗₀ + ½[Ω̂⁺_AC + Ω̂⁻_AC − Ω̂⁺_BS − Ω̂⁻_BS − Ω⁺_BSvac − Ω⁻_BSvac]
      Δ̂_b = 𝓗₀ + ½[Ω̂⁺_AC − Ω̂⁻_AC − Ω̂⁺_BS + Ω̂⁻_BS − Ω⁺_BSvac + Ω⁻_BSvac]
      Δ̂_j = 𝓗₀ − [ω̂⁺_AC,j − ω̂⁺_BS,j + ω⁺_ACvac,j]

    With `form="direct"`, they are built term by term from the coupling
    densities.

    @return
      Mapping from level name to hermitian `OperatorMatrix`.
    """
    light = model.light
    detunings = model.detunings
    result = {}

    def h0(level):
        return model.operator(
            model.bilinear(model.h0_block(level), level, level), hermitian=True)

    if form == "shifts":
        ac = { s: ac_stark(model, s) for s in "+-" }
        bs = { s: bloch_siegert(model, s) for s in "+-" }
        for alpha, s in (("a", +1), ("b", -1)):
            combined = (
                ac["+"].shift.on(alpha) + s * ac["-"].shift.on(alpha)
                - bs["+"].shift.on(alpha) - s * bs["-"].shift.on(alpha)
                - bs["+"].vacuum.on(alpha) - s * bs["-"].vacuum.on(alpha))
            result[alpha] = h0(alpha) + 0.5 * combined
        for j in model.levels.ancillas:
            ac_j = ac_stark(model, "+", j)
            bs_j = bloch_siegert(model, "+", j)
            result[j] = h0(j) - (
                ac_j.shift.on(j) - bs_j.shift.on(j) + ac_j.vacuum.on(j))

    elif form == "direct":
        for alpha in RELEVANT:
            total = h0(alpha)
            for j in model.levels.ancillas:
                O = model.co_block(j, alpha)
                L = model.counter_block(j, alpha)
                total += detunings.inverse("slow", j, j, alpha, alpha) * model.operator(
                    model.bilinear(O.conj().T @ O, alpha, alpha),
                    light.number(alpha).matrix)
                total -= detunings.inverse("fast", j, j, alpha, alpha) * model.operator(
                    model.bilinear(L @ L.conj().T, alpha, alpha),
                    light.anti_number(alpha).matrix)
            result[alpha] = total.hermitized()
        for j in model.levels.ancillas:
            total = h0(j)
            for alpha in RELEVANT:
                O = model.co_block(j, alpha)
                L = model.counter_block(j, alpha)
                total -= detunings.inverse("slow", j, j, alpha, alpha) * model.operator(
                    model.bilinear(O @ O.conj().T, j, j),
                    light.anti_number(alpha).matrix)
                total += detunings.inverse("fast", j, j, alpha, alpha) * model.operator(
                    model.bilinear(L.conj().T @ L, j, j),
                    light.number(alpha).matrix)
            result[j] = total.hermitized()

    else:
        raise DomainError("unknown self-coupling form", form)

    return result


def rabi_coupling(model, keep=_keep_all):
    """
    Returns the Rabi coupling Ω̂_ba from a to b,

      Ω̂_ba = Σ_j [ Ω*_jb Ω_ja / ω⁺_jjab  b̂†â − Λ_jb Λ*_ja / Ω⁺_jjab  â†b̂ ]

    with the slow denominator for the co-rotating and the fast denominator
    for the counter-rotating part.

    @param keep
      Callable `(domain, m, n)` deciding whether a term pair survives.
    """
    light = model.light
    bd_a = light.creation("b").matrix @ light.annihilation("a").matrix
    ad_b = light.creation("a").matrix @ light.annihilation("b").matrix
    total = np.zeros((model.basis.dim, model.basis.dim), dtype=complex)
    for j in model.levels.ancillas:
        if keep("slow", (j, "b"), (j, "a")):
            inverse = model.detunings.inverse("slow", j, j, "a", "b")
            _record(keep, "rabi", j, "co", "slow", inverse)
            block = model.co_block(j, "b").conj().T @ model.co_block(j, "a")
            total += inverse * np.kron(model.bilinear(block, "b", "a"), bd_a)
        if keep("fast", (j, "a"), (j, "b")):
            inverse = model.detunings.inverse("fast", j, j, "a", "b")
            _record(keep, "rabi", j, "counter", "fast", inverse)
            block = model.counter_block(j, "b") @ model.counter_block(j, "a").conj().T
            total -= inverse * np.kron(model.bilinear(block, "b", "a"), ad_b)
    return OperatorMatrix(total, model.basis)


def ancilla_coupling(model, j, k, keep=_keep_all):
    """
    Returns the coupling χ̂_jk from ancilla k to ancilla j,

      χ̂_jk = Σ_α [ −Ω_jα Ω*_kα / ω⁺_jkαα (n̂_α + 1) + Λ_jα Λ*_kα / Ω⁺_jkαα n̂_α ]

    so that χ̂_jk† = χ̂_kj.

    @raise DomainError
      `j == k`, or either is not an ancilla.
    """
    ancillas = model.levels.ancillas
    if j not in ancillas or k not in ancillas:
        raise DomainError("unknown ancilla", (j, k))
    if j == k:
        raise DomainError("ancilla coupling needs distinct ancillas", j)
    light = model.light
    total = np.zeros((model.basis.dim, model.basis.dim), dtype=complex)
    for alpha in RELEVANT:
        if keep("slow", (k, alpha), (j, alpha)):
            inverse = model.detunings.inverse("slow", j, k, alpha, alpha)
            _record(keep, "ancilla", (j, k), "co", "slow", inverse)
            block = model.co_block(j, alpha) @ model.co_block(k, alpha).conj().T
            total -= inverse * np.kron(
                model.bilinear(block, j, k), light.anti_number(alpha).matrix)
        if keep("fast", (j, alpha), (k, alpha)):
            inverse = model.detunings.inverse("fast", j, k, alpha, alpha)
            _record(keep, "ancilla", (j, k), "counter", "fast", inverse)
            block = model.counter_block(j, alpha).conj().T @ model.counter_block(k, alpha)
            total += inverse * np.kron(
                model.bilinear(block, j, k), light.number(alpha).matrix)
    return OperatorMatrix(total, model.basis)


def particle_interaction(model, keep=_keep_all):
    """
    Returns the particle-particle Hamiltonian H_pp,

      Σ_α [α̂†, α̂] { Σ_jk ∫ψ†_α ζ*_kαj ψ_k · ∫ψ†_j ζ_jαk ψ_α
                    + Σ_jk ∫ψ†_α η*_jαk ψ_j · ∫ψ†_k η_kαj ψ_α  − 𝒱_α }

    where 𝒱_α removes the single contraction (j = k) of each product, so
    that only the normal-ordered four-operator part remains.  It vanishes on
    states with fewer than two atoms and on states without ancilla
    population.
    """
    detunings = model.detunings
    total = np.zeros((model.basis.dim, model.basis.dim), dtype=complex)
    for alpha in RELEVANT:
        products = np.zeros((model.basis.atoms.dim, ) * 2, dtype=complex)
        for j in model.levels.ancillas:
            for k in model.levels.ancillas:
                if keep("slow", (k, alpha), (j, alpha)):
                    Ok, Oj = model.co_block(k, alpha), model.co_block(j, alpha)
                    product = (
                        model.bilinear(Ok.conj().T, alpha, k)
                        @ model.bilinear(Oj, j, alpha))
                    if j == k:
                        product -= model.bilinear(Oj.conj().T @ Oj, alpha, alpha)
                    products += detunings.inverse("slow", j, k, alpha, alpha) * product
                if keep("fast", (k, alpha), (j, alpha)):
                    Lk, Lj = model.counter_block(k, alpha), model.counter_block(j, alpha)
                    product = (
                        model.bilinear(Lj, alpha, j)
                        @ model.bilinear(Lk.conj().T, k, alpha))
                    if j == k:
                        product -= model.bilinear(Lj @ Lj.conj().T, alpha, alpha)
                    products += detunings.inverse("fast", j, k, alpha, alpha) * product
        unit = model.light.unit(alpha).matrix
        total -= np.kron(products, unit)
    return OperatorMatrix(total, model.basis).hermitized()


def _record(keep, *args):
    record = getattr(keep, "record", None)
    if record is not None:
        record(*args)


#-------------------------------------------------------------------------------
# Assembly

class EffectiveHamiltonian:
    """
    The time-averaged effective Hamiltonian in the Schrödinger picture,

      H_eff = H_L + H_sp + H_pp

    where H_sp splits into the Rabi block M_𝓡 over the relevant levels and
    the block M_𝓐 over the ancillas.

    @ivar light
      H_L.
    @ivar relevant
      The relevant block: Δ̂_a + Δ̂_b + Ω̂_ba + Ω̂_ba†.
    @ivar ancilla
      The ancilla block: Σ Δ̂_j + Σ_{j≠k} χ̂_jk.
    @ivar pp
      H_pp.
    @ivar provenance
      The `Provenance` of denominators and dropped term pairs.
    """

    def __init__(self, light, relevant, ancilla, pp, provenance):
        self.light = light
        self.relevant = relevant
        self.ancilla = ancilla
        self.pp = pp
        self.provenance = provenance


    def __repr__(self):
        return f"EffectiveHamiltonian(<{self.light.space.dim}>, {self.provenance!r})"


    @property
    def space(self):
        return self.light.space


    @property
    def sp(self):
        return self.relevant + self.ancilla


    @property
    def total(self):
        return self.light + self.relevant + self.ancilla + self.pp


    @property
    def parts(self):
        return dict(
            light=self.light, relevant=self.relevant, ancilla=self.ancilla,
            sp=self.sp, pp=self.pp)



def assemble_H_eff(model, filter=None):
    """
    Hand-assembles the effective Hamiltonian from its shifts and couplings.

    @param filter
      A `FilterSpec`; term pairs whose residual frequency it drops are
      omitted and recorded in the provenance.  If `None`, every intra-domain
      pair is kept.
    @rtype
      `EffectiveHamiltonian`.
    @raise SingularDetuningError
      A detuning is zero.
    """
    keep = _PairFilter(model, filter)
    deltas = self_couplings(model, "shifts")
    for j in model.levels.ancillas:
        for alpha in RELEVANT:
            keep.record(
                "self", j, "co", "slow",
                model.detunings.inverse("slow", j, j, alpha, alpha))
            keep.record(
                "self", j, "counter", "fast",
                model.detunings.inverse("fast", j, j, alpha, alpha))

    rabi = rabi_coupling(model, keep)
    relevant = deltas["a"] + deltas["b"] + rabi + rabi.dag()
    relevant = OperatorMatrix(relevant.matrix, model.basis, hermitian=True)

    ancilla = model.zero()
    for j in model.levels.ancillas:
        ancilla = ancilla + deltas[j]
    for j in model.levels.ancillas:
        for k in model.levels.ancillas:
            if j != k:
                ancilla = ancilla + ancilla_coupling(model, j, k, keep)
    ancilla = OperatorMatrix(ancilla.matrix, model.basis, hermitian=True)

    pp = particle_interaction(model, keep)
    H = EffectiveHamiltonian(
        build_light_hamiltonian(model), relevant, ancilla, pp, keep.provenance)
    LOG.info(
        f"assembled H_eff on {model.basis.dim} states; "
        f"{len(H.provenance.dropped)} pairs dropped")
    return H


def heisenberg_rhs(H, level, mode):
    """
    Returns [ψ̂_{level,mode}, H], the right-hand side of the Heisenberg
    equation i dψ̂/dt = [ψ̂, H].

    @param H
      An `OperatorMatrix` or `EffectiveHamiltonian`.
    """
    if isinstance(H, EffectiveHamiltonian):
        H = H.total
    psi = build_field_op(level, mode, "annihilate", H.space)
    return psi.comm(H)


#-------------------------------------------------------------------------------
# Perturbation oracle

class ShiftComparison(collections.namedtuple(
        "ShiftComparison", ("state", "exact", "predicted"))):
    """
    An exact level shift against the effective-Hamiltonian prediction.
    """

    @property
    def relative_error(self):
        if self.exact == 0:
            return abs(self.predicted)
        return abs(self.predicted - self.exact) / abs(self.exact)



def perturbative_shift_oracle(model, state, H_eff=None):
    """
    Compares the field-induced shift of a one-atom basis state, from exact
    diagonalization of the Schrödinger Hamiltonian on the one-atom sector,
    with the diagonal of the effective Hamiltonian.

    The state must not be degenerate with any state it couples to at second
    order, or the eigenvector with the largest overlap is not the shifted
    state.

    @type state
      `BasisState` with one atom.
    @rtype
      `ShiftComparison`.
    """
    basis = model.basis
    if sum(state.config) != 1:
        raise DomainError("shift oracle needs a one-atom state", state)
    if 1 not in basis.sectors:
        raise DomainError("basis lacks the one-atom sector")
    i = basis.index(state)

    counts = basis.level_counts().sum(axis=1)
    sector = np.flatnonzero(counts == 1)
    position = int(np.flatnonzero(sector == i)[0])

    bare = build_atomic_hamiltonian(model) + build_light_hamiltonian(model)
    full = bare + build_dipole_hamiltonian(model)
    values, vectors = scipy.linalg.eigh(full.restrict(sector))
    nearest = int(np.argmax(np.abs(vectors[position, :]) ** 2))
    E0 = bare.matrix[i, i].real
    exact = float(values[nearest] - E0)

    if H_eff is None:
        H_eff = assemble_H_eff(model)
    predicted = float(H_eff.total.matrix[i, i].real - E0)
    LOG.debug(f"shift of {state}: exact {exact}, predicted {predicted}")
    return ShiftComparison(state, exact, predicted)


