"""
End-to-end pulse scenarios.

A scenario prepares atoms and light, applies one pulse to the reduced
Hamiltonian, and reduces the output state to populations:

- `run_single_particle`: one atom, Raman diffraction between a and b.
- `run_hom`: two atoms in a and b at a 50:50 pulse, the Hong-Ou-Mandel dip.
- `run_oracle`: evolution under the effective Hamiltonian against the
  filtered exact evolution.

Atomic inputs name orbitals as `(level, κ)` on the momentum ladder, or
`(level, mode index)` on the grid.
"""

#-------------------------------------------------------------------------------

import collections
import concurrent.futures
import logging
import math
import os
import weakref

import numpy as np

from   .averaging import FilterSpec, averaged_observable, dressed_observable
from   .averaging import exact_evolve, low_pass, rotate, to_averaged_state
from   .exc import ConfigError, DomainError
from   .lambda_model import LambdaModel, LevelScheme, assemble_H_eff
from   .lambda_model import to_interaction_picture
from   .lib import log
from   .lib.py import format_ctor
from   .pulse import delta_pulse_U, exact_pulse_U
from   .pulse import phase_factor_C, reduce_model
from   .spaces import BasisState, PlaneWave, Sampled, normalize

LOG = logging.getLogger(__name__)

TRUNCATION_TOLERANCE = 1e-6
SYMMETRY_TOLERANCE = 1e-12

#-------------------------------------------------------------------------------
# Inputs

class OpticalInput:
    """
    Light in a superposition of Fock pairs, Σ w_{n_a n_b} |n_a, n_b⟩.

    @ivar table
      Mapping `(n_a, n_b)` → amplitude, normalized.
    @ivar truncation_loss
      Probability lost by truncating an infinite superposition.
    """

    def __init__(self, table, *, truncation_loss=0.0):
        table = { (int(a), int(b)): complex(w) for (a, b), w in dict(table).items() }
        if any( a < 0 or b < 0 for a, b in table ):
            raise DomainError("negative photon number", sorted(table))
        norm = math.sqrt(sum( abs(w) ** 2 for w in table.values() ))
        if norm == 0:
            raise DomainError("optical input is empty")
        self.table = { k: w / norm for k, w in table.items() if w != 0 }
        self.truncation_loss = float(truncation_loss)


    def __repr__(self):
        return format_ctor(self, self.table)


    @classmethod
    def fock(class_, n_a, n_b):
        return class_({(n_a, n_b): 1})


    @classmethod
    def product(class_, w_a, w_b):
        """
        The product w_{n_a} w_{n_b} of amplitudes per mode.
        """
        return class_({
            (i, j): x * y
            for i, x in enumerate(w_a) for j, y in enumerate(w_b)
        })


    @classmethod
    def coherent(class_, alpha_a, alpha_b, n_max):
        """
        Coherent states in both modes, truncated at `n_max` photons each.
        """
        def amplitudes(alpha):
            n = np.arange(n_max + 1)
            log_norm = -abs(alpha) ** 2 / 2 - 0.5 * np.array([ math.lgamma(k + 1) for k in n ])
            return np.exp(log_norm) * np.power(complex(alpha), n)

        w_a, w_b = amplitudes(alpha_a), amplitudes(alpha_b)
        kept = np.sum(np.abs(w_a) ** 2) * np.sum(np.abs(w_b) ** 2)
        loss = max(0.0, 1 - float(kept))
        if loss > TRUNCATION_TOLERANCE:
            LOG.warning(f"coherent input loses {loss:.3e} above n_max={n_max}")
        light = class_.product(w_a, w_b)
        light.truncation_loss = loss
        return light


    def vector(self, light):
        """
        The amplitudes on a `LightSpace`.

        @raise DomainError
          A populated Fock pair lies above the truncation.
        """
        vector = np.zeros(light.dim, dtype=complex)
        dim_b = light.ladder_b.dim
        for (n_a, n_b), w in self.table.items():
            if n_a >= light.ladder_a.dim or n_b >= dim_b:
                raise DomainError("optical input above truncation", (n_a, n_b))
            vector[n_a * dim_b + n_b] = w
        return vector



class AtomicInput:
    """
    One or two atoms over orbitals.

    @ivar particles
      1 or 2.
    @ivar amplitudes
      For one atom, mapping from orbital to amplitude.  For two atoms, the
      symmetric matrix W as a mapping from orbital pairs to amplitudes, for
      the state Σ_pq W_pq a†_p a†_q |0⟩.
    @ivar truncation_error
      Probability lost by expanding a wave packet over finitely many modes.
    """

    def __init__(self, amplitudes, *, particles=1, truncation_error=0.0):
        if particles not in (1, 2):
            raise DomainError("inputs hold one or two atoms", particles)
        amplitudes = { k: complex(w) for k, w in dict(amplitudes).items() if w != 0 }
        if not amplitudes:
            raise DomainError("atomic input is empty")
        if particles == 2:
            scale = max( abs(w) for w in amplitudes.values() )
            for (p, q), w in amplitudes.items():
                if abs(amplitudes.get((q, p), 0) - w) > SYMMETRY_TOLERANCE * scale:
                    raise DomainError("two-atom input is not symmetric", (p, q))
        self.particles = particles
        self.amplitudes = amplitudes
        self.truncation_error = float(truncation_error)


    def __repr__(self):
        return format_ctor(self, self.amplitudes, particles=self.particles)


    @classmethod
    def single(class_, level, kappa=0.0):
        return class_({(level, float(kappa)): 1})


    @classmethod
    def gaussian(class_, level, amp, recoil, *, span=4):
        """
        A Gaussian wave packet expanded over the momenta κ + mK, |m| ≤ span.

        @type amp
          `GaussianAmplitude`.
        """
        if recoil == 0:
            return class_.single(level, amp.kappa)
        m = np.arange(-span, span + 1)
        weights = amp.momentum_weights(amp.kappa + m * recoil)
        wide = span + int(math.ceil(40 / (amp.sigma * abs(recoil))))
        total = np.sum(np.abs(amp.momentum_weights(
            amp.kappa + np.arange(-wide, wide + 1) * recoil)) ** 2)
        error = max(0.0, 1 - float(np.sum(np.abs(weights) ** 2) / total))
        if error > TRUNCATION_TOLERANCE:
            LOG.warning(f"wave packet truncated at ±{span}K loses {error:.3e}")
        return class_(
            { (level, float(amp.kappa + i * recoil)): w for i, w in zip(m, weights) },
            truncation_error=error)


    @classmethod
    def pair(class_, first, second):
        """
        Two atoms in the symmetrized product of two one-atom inputs.
        """
        if first.particles != 1 or second.particles != 1:
            raise DomainError("pair needs two one-atom inputs")
        table = collections.defaultdict(complex)
        for p, x in first.amplitudes.items():
            for q, y in second.amplitudes.items():
                table[(p, q)] += x * y / 2
                table[(q, p)] += x * y / 2
        return class_(
            table, particles=2,
            truncation_error=first.truncation_error + second.truncation_error)


    def vector(self, model):
        """
        The normalized amplitudes on the atomic Fock space of `model`.
        """
        atoms = model.basis.atoms
        vector = np.zeros(atoms.dim, dtype=complex)
        if self.particles == 1:
            for key, w in self.amplitudes.items():
                vector += w * atoms.state({_orbital(model, key): 1})
        else:
            for (p, q), w in self.amplitudes.items():
                p, q = _orbital(model, p), _orbital(model, q)
                if p == q:
                    vector += math.sqrt(2) * w * atoms.state({p: 2})
                else:
                    vector += w * atoms.state({p: 1, q: 1})
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise DomainError("atomic input vanishes")
        return vector / norm



def _orbital(model, key):
    level, label = key
    modes = model.modes
    if modes.backend == "ladder":
        return modes.orbital(level, modes.find(level, label))
    return modes.orbital(level, int(label))


def build_state(model, atoms, light):
    """
    Returns the normalized product state of atoms and light.

    @raise DomainError
      The basis lacks the atom-number sector of `atoms`.
    """
    if atoms.particles not in model.basis.sectors:
        raise DomainError("basis lacks the input atom number", atoms.particles)
    psi = model.basis.product_state(atoms.vector(model), light.vector(model.light))
    return normalize(psi)


#-------------------------------------------------------------------------------
# Results

class PhaseRecord(collections.namedtuple(
        "PhaseRecord",
        ("channel", "level", "kappa", "n_a", "n_b", "photons", "kick", "amplitude"))):
    """
    One output component of a one-atom pulse, classified against the input.

    @ivar channel
      `"stay"`, `"co"` for the Ω-mediated swap, `"counter"` for the
      Λ-mediated swap, or `"other"`.
    @ivar photons
      The change of n_a.
    @ivar kick
      The change of momentum, 0 or ±K.
    """



def _classify(model, start, end):
    (l0, k0, a0, b0), (l1, k1, a1, b1) = start, end
    K = model.couplings.recoil
    photons = a1 - a0
    kick = k1 - k0
    if (l0, round(k0, 9), a0, b0) == (l1, round(k1, 9), a1, b1):
        return "stay", photons, 0.0
    # a → b by Ω takes a photon from a to b and kicks +K; Λ the opposite.
    step = {("a", "b"): +1, ("b", "a"): -1}.get((l0, l1))
    if step is not None and a1 + b1 == a0 + b0 and math.isclose(abs(kick), abs(K)):
        if photons == -step and math.isclose(kick, step * K):
            return "co", photons, kick
        if photons == step and math.isclose(kick, -step * K):
            return "counter", photons, kick
    return "other", photons, kick


class PulseResult:
    """
    The state after a pulse.

    @ivar output
      The output `StateVector`.
    @ivar model
      The `LambdaModel` it lives on.
    @ivar records
      Tuple of `PhaseRecord`, for one-atom inputs in a single basis state.
    @ivar pulse
      The `PulseSpec` applied, if known.
    @ivar unitarity_defect
      From the pulse propagator.
    """

    def __init__(
            self, output, model, *, pulse=None, records=(), unitarity_defect=0.0,
            truncation=0.0):
        self.output = output
        self.model = model
        self.pulse = pulse
        self.records = tuple(records)
        self.unitarity_defect = unitarity_defect
        self.truncation = truncation


    def __repr__(self):
        return f"PulseResult(<{self.output.space.dim}>, norm={self.norm!r})"


    @property
    def basis(self):
        return self.model.basis


    @property
    def norm(self):
        """
        ‖output‖², the sum of all populations.
        """
        return float(np.sum(self.output.probabilities()))


    def populations(self, threshold=0.0):
        """
        Mapping from `BasisState` to probability, above `threshold`.
        """
        p = self.output.probabilities()
        states = self.basis.states()
        return { states[i]: float(p[i]) for i in np.flatnonzero(p > threshold) }


    def population(self, atoms, n_a, n_b):
        """
        The probability of one basis state, with atoms given as orbitals.
        """
        config = [0] * self.model.modes.n_orbitals
        for key in atoms:
            config[_orbital(self.model, key)] += 1
        i = self.basis.index(BasisState(tuple(config), n_a, n_b))
        return float(self.output.probabilities()[i])


    def internal_populations(self):
        """
        Mapping from internal-state label, e.g. `"ab"`, to probability.
        """
        p = self.output.probabilities()
        labels = self.basis.labels()
        totals = { l: 0.0 for l in sorted(set(labels)) }
        for label, x in zip(labels, p):
            totals[label] += float(x)
        return totals


    @property
    def coincidence(self):
        """
        The probability of finding one atom in a and one in b.
        """
        return self.internal_populations().get("ab", 0.0)


    def photon_marginals(self):
        """
        Array `P[n_a, n_b]` of photon-number probabilities.
        """
        light = self.basis.light
        p = self.output.probabilities().reshape(self.basis.atoms.dim, light.dim).sum(axis=0)
        return p.reshape(light.ladder_a.dim, light.ladder_b.dim)


    def momentum_marginals(self):
        """
        Mapping from orbital `(level, κ)` to its mean occupation.
        """
        atoms = self.basis.atoms
        p = self.output.probabilities().reshape(atoms.dim, -1).sum(axis=1)
        occupation = p @ atoms.occupations()
        modes = self.model.modes
        result = {}
        for (level, index), n in zip(modes.orbitals(), occupation):
            label = modes.kappas(level)[index] if modes.backend == "ladder" else index
            result[(level, float(label))] = float(n)
        return result


    def summary(self):
        """
        Scalar results for tables.
        """
        summary = dict(norm=self.norm, coincidence=self.coincidence)
        if self.pulse is not None:
            summary["theta"] = self.pulse.theta
        for label, p in self.internal_populations().items():
            summary["P_" + label] = p
        summary["unitarity_defect"] = self.unitarity_defect
        return summary



#-------------------------------------------------------------------------------
# Scenarios

_REDUCED = weakref.WeakKeyDictionary()

def _reduce(model):
    try:
        return _REDUCED[model]
    except KeyError:
        reduced = _REDUCED[model] = reduce_model(model)
        return reduced


def _propagator(method):
    if method == "delta":
        return delta_pulse_U
    elif method == "exact":
        return exact_pulse_U
    else:
        raise DomainError("unknown pulse method", method)


def _phase_records(model, atom, light, output):
    if len(atom.amplitudes) != 1 or len(light.table) != 1:
        return ()
    (level, kappa), = atom.amplitudes
    (n_a, n_b), = light.table
    start = (level, kappa, n_a, n_b)
    records = []
    modes = model.modes
    for i in np.flatnonzero(output.probabilities() > 1e-14):
        state = model.basis.states()[i]
        p = state.config.index(1)
        l1, index = modes.orbitals()[p]
        end = (l1, float(modes.kappas(l1)[index]), state.n_a, state.n_b)
        channel, photons, kick = _classify(model, start, end)
        records.append(PhaseRecord(channel, *end, photons, kick, output.amplitudes[i]))
    return records


@log.log_call(LOG.debug)
def run_single_particle(model, atom, light, pulse, *, method="delta"):
    """
    Applies a pulse to one atom.

    Whether counter-rotating couplings take part is a property of the
    model's couplings.

    @type atom
      `AtomicInput` with one atom.
    @type light
      `OpticalInput`.
    @param method
      `"delta"` for the delta-pulse propagator, `"exact"` for exp(−iϑH_R).
    @rtype
      `PulseResult`.
    """
    if atom.particles != 1:
        raise DomainError("single-particle run needs one atom", atom.particles)
    psi = build_state(model, atom, light)
    U = _propagator(method)(pulse, _reduce(model))
    output = U.apply(psi)
    records = ()
    if model.modes.backend == "ladder":
        records = _phase_records(model, atom, light, output)
    LOG.info(f"single-particle pulse at ϑ={pulse.theta:.6g}")
    return PulseResult(
        output, model, pulse=pulse, records=records, unitarity_defect=U.unitarity_defect,
        truncation=atom.truncation_error + light.truncation_loss)


class BeamSplitterBlock(collections.namedtuple(
        "BeamSplitterBlock", ("states", "matrix", "phases"))):
    """
    The pulse restricted to the states it mixes.

    @ivar states
      Basis indices of |a, κ; n_a, n_b⟩ and, if reachable,
      |b, κ + K; n_a − 1, n_b + 1⟩.
    @ivar matrix
      The 1×1 or 2×2 propagator block.
    @ivar phases
      The phase factors 𝒞 of the states.
    """



def beam_splitter_matrix(model, pulse, n_a, n_b, kappa=0.0):
    """
    Returns the closed-form beam-splitter block for one atom entering in
    |a, κ⟩ with photons |n_a, n_b⟩,

      [[cos ϑw,            −i e^{−iφ} sin ϑw],
       [−i e^{iφ} sin ϑw,  cos ϑw          ]] · diag(e^{−iϑ𝒞_a}, e^{−iϑ𝒞_b})

    with w = |Ω|√(n_a(n_b + 1)) and φ the phase of Ω.

    @raise DomainError
      The couplings are not co-rotating plane waves.
    """
    if not model.couplings.rwa:
        raise DomainError("beam-splitter block needs the rotating-wave approximation")
    omega = _reduce(model).joint.omega
    if not isinstance(omega, PlaneWave):
        raise DomainError("beam-splitter block needs plane-wave couplings")
    theta = pulse.theta
    K = model.couplings.recoil
    basis = model.basis

    def index(level, k, a, b):
        config = [0] * model.modes.n_orbitals
        config[_orbital(model, (level, k))] = 1
        return basis.index(BasisState(tuple(config), a, b))

    C_a = phase_factor_C((n_a, n_b), "a", kappa, model)
    start = index("a", kappa, n_a, n_b)
    reachable = (
        n_a > 0 and n_b + 1 <= basis.light.ladder_b.n_max
        and _has_mode(model, "b", kappa + K))
    if not reachable:
        return BeamSplitterBlock(
            (start, ), np.array([[np.exp(-1j * theta * C_a)]]), (C_a, ))

    C_b = phase_factor_C((n_a - 1, n_b + 1), "b", kappa + K, model)
    w = omega.magnitude * math.sqrt(n_a * (n_b + 1))
    phi = np.angle(omega.amplitude)
    c, s = math.cos(theta * w), math.sin(theta * w)
    mixing = np.array([
        [c, -1j * np.exp(-1j * phi) * s],
        [-1j * np.exp(1j * phi) * s, c],
    ])
    phases = np.diag(np.exp(-1j * theta * np.array([C_a, C_b])))
    return BeamSplitterBlock(
        (start, index("b", kappa + K, n_a - 1, n_b + 1)), mixing @ phases, (C_a, C_b))


def _has_mode(model, level, kappa):
    try:
        model.modes.find(level, kappa)
    except DomainError:
        return False
    return True


def with_mass(model, mass):
    """
    Returns the model with another atomic mass.
    """
    levels = model.levels
    return LambdaModel(
        LevelScheme(levels.frequencies, mass=mass, potentials=levels.potentials),
        model.couplings, model.basis)


def _check_uniform(model):
    for j, alpha in model.couplings.transitions:
        fn = model.couplings.omega(j, alpha)
        if isinstance(fn, Sampled):
            magnitude = np.abs(fn.values_)
            if np.ptp(magnitude) > 1e-9 * max(magnitude.max(), 1e-300):
                LOG.warning(f"coupling {j}{alpha} is not uniform; HOM assumes it is")


@log.log_call(LOG.debug)
def run_hom(model, atoms, light, pulse, *, optical_limit=False):
    """
    Applies a pulse to two atoms, one in a and one in b.

    @param atoms
      Symmetric two-atom `AtomicInput`.
    @param optical_limit
      If true, the atoms are made infinitely heavy, which leaves the optical
      beam splitter.
    @rtype
      `PulseResult`; its `coincidence` is the probability that the atoms
      leave in different internal states.
    """
    if atoms.particles != 2:
        raise DomainError("HOM run needs two atoms", atoms.particles)
    if optical_limit:
        model = with_mass(model, math.inf)
    _check_uniform(model)
    psi = build_state(model, atoms, light)
    U = delta_pulse_U(pulse, _reduce(model))
    result = PulseResult(
        U.apply(psi), model, pulse=pulse, unitarity_defect=U.unitarity_defect,
        truncation=atoms.truncation_error + light.truncation_loss)
    LOG.info(f"HOM pulse at ϑ={pulse.theta:.6g}: coincidence {result.coincidence:.3e}")
    return result


#-------------------------------------------------------------------------------
# Sweeps

class SweepRow(collections.namedtuple("SweepRow", ("parameter", "value", "result"))):

    @property
    def summary(self):
        return self.result.summary()



def sweep_threads():
    """
    The sweep parallelism, from `SIM_THREADS` or the processor count.

    @raise ConfigError
      `SIM_THREADS` is not a positive integer.
    """
    value = os.environ.get("SIM_THREADS")
    if value is None:
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        threads = 0
    if threads < 1:
        raise ConfigError(f"invalid thread count {value!r}", field="SIM_THREADS")
    return threads


def sweep(parameter, grid, scenario, *, threads=None):
    """
    Runs a scenario at every grid value, in parallel.

    @param scenario
      Callable taking a grid value and returning a `PulseResult`.
    @return
      List of `SweepRow`, in grid order.
    """
    grid = list(grid)
    if not grid:
        return []
    threads = min(threads or sweep_threads(), len(grid))
    with log.timed(LOG, f"sweep of {parameter} over {len(grid)} points"):
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(scenario, grid))
    return [ SweepRow(parameter, v, r) for v, r in zip(grid, results) ]


#-------------------------------------------------------------------------------
# Effective against exact evolution

class OracleResult(collections.namedtuple(
        "OracleResult", ("times", "exact", "effective", "max_delta"))):
    """
    Level populations from the filtered exact and the effective evolution.

    @ivar exact
      Mapping from level to filtered population trace.
    @ivar effective
      Mapping from level to population trace under H_eff, with populations
      dressed by the micromotion and filtered like the exact trace.
    @ivar max_delta
      The largest absolute difference over levels and times.
    """

    def __repr__(self):
        return f"OracleResult(<{len(self.times)} samples>, max_delta={self.max_delta:.3e})"



def level_population(model, level):
    """
    The number operator of atoms in `level`.
    """
    n = model.modes.n_modes(level)
    return model.operator(model.bilinear(np.eye(n), level, level), hermitian=True)


def run_oracle(model, atom, light, *, filter=None, dt=0.25, duration=None):
    """
    Compares the level populations of exp(−iH_eff t) with those of the
    low-pass filtered exact evolution.

    @param filter
      The `FilterSpec` for both H_eff and the exact trace; by default with
      cutoff 2.
    @param duration
      By default, one period π/|Ω| of the two-photon Rabi oscillation.
    @rtype
      `OracleResult`.
    """
    filter = FilterSpec(2.0) if filter is None else filter
    if duration is None:
        omega = _reduce(model).joint.omega
        if not isinstance(omega, PlaneWave) or omega.magnitude == 0:
            raise DomainError("default duration needs a plane-wave Rabi coupling")
        duration = math.pi / omega.magnitude
    times = np.arange(0, duration + dt / 2, dt)
    psi0 = build_state(model, atom, light)
    h = to_interaction_picture(model)

    with log.timed(LOG, "exact evolution"):
        trace = exact_evolve(h, psi0, times)

    # The averaged state starts from the undressed initial state and evolves
    # under the Schrödinger-picture H_eff; exp(iGt) returns it to the
    # interaction picture of the exact trace.
    phi0 = to_averaged_state(h, psi0).amplitudes
    H_eff = assemble_H_eff(model, filter).total
    effective = rotate(H_eff.spectrum(), times, np.repeat(phi0[None, :], len(times), axis=0))
    effective = rotate(h.frame.spectrum(), -times, effective)

    exact_p = {}
    effective_p = {}
    for level in model.levels.levels:
        N = level_population(model, level)
        exact_p[level] = averaged_observable(trace, times, filter, N).values
        dressed = dressed_observable(h, filter, N).values(effective, times)
        effective_p[level] = low_pass(dressed, dt, filter)
    delta = max(
        float(np.max(np.abs(exact_p[l] - effective_p[l]))) for l in exact_p)
    LOG.info(f"oracle over {len(times)} samples: max delta {delta:.3e}")
    return OracleResult(times, exact_p, effective_p, delta)


