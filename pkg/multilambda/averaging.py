"""
Second-order time averaging of harmonic Hamiltonians.

A harmonic Hamiltonian has the form

  H(t) = H0 + Σ_n { h_n exp(−iω_n t) + g_n exp(−iΩ_n t) ± h.c. }

with two frequency domains, the slow {ω_n} and the fast {Ω_n}.  Low-pass
filtering the dynamics removes single frequencies, sums, and cross-domain
combinations, and keeps differences within one domain.  To second order the
averaged dynamics is generated by

  H_eff(t) = H0 ± Σ_nm { [h†_m, h_n] / ω⁺_nm exp(i(ω_m − ω_n)t)
                        + [g†_m, g_n] / Ω⁺_nm exp(i(Ω_m − Ω_n)t) }

where 1/ω±_nm = ½(1/ω_n ± 1/ω_m), plus anticommutator and dissipator terms
weighted by 1/ω⁻_nm which vanish when each domain holds a single frequency.

This module also provides the brute-force oracle: exact evolution of the
time-dependent Schrödinger equation, and low-pass filtering of the resulting
observables.
"""

#-------------------------------------------------------------------------------

import collections
import enum
import logging
import math

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.signal

from   .exc import DomainError, InsufficientDataError, SingularDetuningError
from   .exc import StiffnessError
from   .lib.memo import memoize_method
from   .lib.py import format_ctor
from   .spaces import OperatorMatrix, StateVector

LOG = logging.getLogger(__name__)

DOMAINS = ("slow", "fast")

# Relative tolerance below which two frequencies count as equal.
TIE_TOLERANCE = 1e-12

# Exact integration tolerances.
RK_TOLERANCE = 1e-10
NORM_DRIFT_TOLERANCE = 1e-8

#-------------------------------------------------------------------------------

class HarmonicTerm(collections.namedtuple("HarmonicTerm", ("op", "frequency", "label"))):
    """
    One oscillating term `op · exp(−i frequency t)`.
    """

    def __new__(class_, op, frequency, label=None):
        frequency = float(frequency)
        if not math.isfinite(frequency):
            raise DomainError("term frequency not finite", frequency)
        if frequency == 0:
            raise SingularDetuningError(frequency)
        return super().__new__(class_, op, frequency, label)


    def __repr__(self):
        return format_ctor(self, self.op, self.frequency, self.label)



class HarmonicHamiltonian:
    """
    A time-independent part plus oscillating terms in two frequency domains.

    @ivar H0
      The time-independent `OperatorMatrix`.
    @ivar slow_terms
      Tuple of `HarmonicTerm` in the slow domain.
    @ivar fast_terms
      Tuple of `HarmonicTerm` in the fast domain.
    @ivar hc_sign
      +1 if the conjugate terms are added, −1 if subtracted.
    @ivar frame
      The optional generator G of the interaction picture in which this
      Hamiltonian is written, such that the Schrödinger-picture Hamiltonian
      is G + H(0).
    """

    def __init__(self, H0, slow_terms=(), fast_terms=(), *, hc_sign=+1, frame=None):
        if hc_sign not in (+1, -1):
            raise DomainError("hc_sign must be ±1", hc_sign)
        slow_terms = tuple( HarmonicTerm(*t) for t in slow_terms )
        fast_terms = tuple( HarmonicTerm(*t) for t in fast_terms )
        for term in slow_terms + fast_terms:
            if term.op.space != H0.space:
                raise DomainError("term lives on a different space", term.label)
        if frame is not None and frame.space != H0.space:
            raise DomainError("frame lives on a different space")

        self.H0 = H0
        self.slow_terms = slow_terms
        self.fast_terms = fast_terms
        self.hc_sign = hc_sign
        self.frame = frame


    def __repr__(self):
        return (
            f"HarmonicHamiltonian(<{len(self.slow_terms)} slow>, "
            f"<{len(self.fast_terms)} fast>, hc_sign={self.hc_sign:+d})")


    @property
    def space(self):
        return self.H0.space


    def terms(self, domain):
        if domain == "slow":
            return self.slow_terms
        elif domain == "fast":
            return self.fast_terms
        else:
            raise DomainError("unknown frequency domain", domain)


    @property
    def frequencies(self):
        return np.array([ t.frequency for t in self.slow_terms + self.fast_terms ])


    def at(self, t):
        """
        Returns H(t).
        """
        matrix = self.H0.matrix.copy()
        for term in self.slow_terms + self.fast_terms:
            phase = np.exp(-1j * term.frequency * t)
            matrix += phase * term.op.matrix
            matrix += self.hc_sign * np.conj(phase) * term.op.matrix.conj().T
        return OperatorMatrix(matrix, self.space, hermitian=self.hc_sign > 0)


    @memoize_method
    def schrodinger(self):
        """
        Returns the time-independent Schrödinger-picture Hamiltonian G + H(0).

        @raise DomainError
          No frame is attached.
        """
        if self.frame is None:
            raise DomainError("Hamiltonian has no interaction-picture frame")
        return self.frame + self.at(0)



#-------------------------------------------------------------------------------

class Verdict(enum.Enum):

    KEEP = "keep"
    DROP = "drop"



class FilterSpec(collections.namedtuple("FilterSpec", ("cutoff", "window", "width"))):
    """
    A low-pass filter.

    @ivar cutoff
      The corner frequency; combinations with magnitude below it are kept.
    @ivar window
      `"gaussian"` (default) or `"ideal"`.  The ideal window is realized as a
      Blackman-windowed sinc kernel.
    @ivar width
      Kernel width in time.  For the gaussian window this is σ_t, by default
      10 / cutoff; for the ideal window the total span, by default
      40π / cutoff.
    """

    WINDOWS = ("gaussian", "ideal")

    def __new__(class_, cutoff, window="gaussian", width=None):
        cutoff = float(cutoff)
        if not cutoff > 0 or not math.isfinite(cutoff):
            raise DomainError("filter cutoff must be positive", cutoff)
        if window not in class_.WINDOWS:
            raise DomainError("unknown filter window", window)
        if width is None:
            width = 10 / cutoff if window == "gaussian" else 40 * math.pi / cutoff
        elif not width > 0:
            raise DomainError("filter width must be positive", width)
        return super().__new__(class_, cutoff, window, float(width))


    def __repr__(self):
        return format_ctor(self, self.cutoff, self.window, self.width)


    def keeps(self, combo):
        return abs(combo) < self.cutoff


    @property
    def half_width(self):
        """
        Half the time support of the kernel.
        """
        return 4 * self.width if self.window == "gaussian" else self.width / 2


    def kernel(self, dt):
        """
        Returns the kernel sampled at spacing `dt`, unnormalized.
        """
        if not dt > 0:
            raise DomainError("sample spacing must be positive", dt)
        half = int(math.ceil(self.half_width / dt))
        tau = dt * np.arange(-half, half + 1)
        if self.window == "gaussian":
            return np.exp(-0.5 * (tau / self.width) ** 2)
        else:
            return np.sinc(self.cutoff * tau / np.pi) * np.blackman(len(tau))


    def gain(self, frequency):
        """
        Returns the nominal amplitude response at `frequency`.
        """
        if self.window == "gaussian":
            return float(np.exp(-0.5 * (self.width * frequency) ** 2))
        else:
            return 1.0 if self.keeps(frequency) else 0.0



#-------------------------------------------------------------------------------

def _sign(sign):
    if sign in (+1, "+"):
        return +1
    elif sign in (-1, "-"):
        return -1
    else:
        raise DomainError("sign must be ±", sign)


def inverse_detuning_sum(f1, f2, sign=+1):
    """
    Returns ½(1/f1 ± 1/f2).

      >>> inverse_detuning_sum(4, 6, +1)
      0.20833333333333331

    @param sign
      +1 or "+" for the sum, −1 or "-" for the difference.
    @raise SingularDetuningError
      Either frequency is zero.
    """
    if f1 == 0 or f2 == 0:
        raise SingularDetuningError(f1, f2)
    return 0.5 * (1 / f1 + _sign(sign) / f2)


def resonant(f1, f2, scale=None):
    """
    True if two frequencies are equal within the tie tolerance.
    """
    scale = max(abs(f1), abs(f2)) if scale is None else scale
    return abs(f1 - f2) < TIE_TOLERANCE * scale


def classify_frequency(combo, filter):
    """
    Returns `Verdict.KEEP` if the low-pass filter passes `combo`.
    """
    return Verdict.KEEP if filter.keeps(combo) else Verdict.DROP


class Pair(collections.namedtuple(
        "Pair", ("domain", "m", "n", "plus", "minus", "combo"))):
    """
    One term pair (m, n) of a frequency domain that survives averaging.

    @ivar plus
      ½(1/f_n + 1/f_m).
    @ivar minus
      ½(1/f_n − 1/f_m); zero for n = m and for equal frequencies.
    @ivar combo
      The residual frequency f_m − f_n, or exactly zero if resonant.
    """



def kept_pairs(h, filter, domain):
    """
    Returns the `Pair`s of a domain whose residual frequency the filter keeps.

    Dropped pairs are logged at DEBUG level.
    """
    terms = h.terms(domain)
    scale = np.max(np.abs(h.frequencies)) if len(h.frequencies) else 0
    pairs = []
    for m, tm in enumerate(terms):
        for n, tn in enumerate(terms):
            f_m, f_n = tm.frequency, tn.frequency
            if m == n or resonant(f_m, f_n, scale):
                combo = 0.0
                minus = 0.0
            else:
                combo = f_m - f_n
                minus = inverse_detuning_sum(f_n, f_m, -1)
            if classify_frequency(combo, filter) is Verdict.DROP:
                LOG.debug(f"dropped {domain} pair ({tm.label}, {tn.label}) at {combo}")
                continue
            pairs.append(Pair(
                domain, m, n, inverse_detuning_sum(f_n, f_m, +1), minus, combo))
    return pairs


def _second_order(h, pairs, t):
    matrix = np.zeros_like(h.H0.matrix)
    for pair in pairs:
        terms = h.terms(pair.domain)
        h_m, h_n = terms[pair.m].op.matrix, terms[pair.n].op.matrix
        hd_m = h_m.conj().T
        phase = 1 if pair.combo == 0 else np.exp(1j * pair.combo * t)
        matrix += (pair.plus * phase) * (hd_m @ h_n - h_n @ hd_m)
    return h.hc_sign * matrix


def effective_hamiltonian(h, filter, t=0):
    """
    Returns the time-averaged effective Hamiltonian at time `t`.

    Pairs whose residual frequency the filter drops are omitted; single
    frequencies, sums, and cross-domain combinations never appear.

    @type h
      `HarmonicHamiltonian`.
    @type filter
      `FilterSpec`.
    @raise SingularDetuningError
      A term frequency is zero.
    """
    pairs = kept_pairs(h, filter, "slow") + kept_pairs(h, filter, "fast")
    matrix = h.H0.matrix + _second_order(h, pairs, t)
    return OperatorMatrix(matrix, h.space, hermitian=True)


def to_schrodinger(h, H_eff, t=0):
    """
    Restores the Schrödinger picture: G + exp(−iGt) H_eff exp(iGt).

    @param H_eff
      The interaction-picture effective Hamiltonian at time `t`.
    @raise DomainError
      `h` has no frame.
    """
    if h.frame is None:
        raise DomainError("Hamiltonian has no interaction-picture frame")
    if t == 0:
        return h.frame + H_eff
    spectrum = h.frame.spectrum()
    rotate = spectrum.apply(lambda x: np.exp(-1j * x * t))
    matrix = rotate @ H_eff.matrix @ rotate.conj().T
    return h.frame + OperatorMatrix(matrix, h.space).hermitized()


#-------------------------------------------------------------------------------
# Micromotion

def micromotion(h, t=0):
    """
    Returns the first-order micromotion generator

      K(t) = Σ_n { h_n exp(−iω_n t) ∓ h†_n exp(iω_n t) } / ω_n

    over both domains, such that i dK/dt reproduces the oscillating terms and
    the exact state is ψ(t) = exp(K(t)) φ(t) with φ the averaged state.
    """
    matrix = np.zeros_like(h.H0.matrix)
    for term in h.slow_terms + h.fast_terms:
        phase = np.exp(-1j * term.frequency * t)
        op = term.op.matrix
        matrix += (phase * op - h.hc_sign * np.conj(phase) * op.conj().T) / term.frequency
    return OperatorMatrix(matrix, h.space)


def to_averaged_state(h, psi, t=0):
    """
    Maps an exact state at time `t` to the averaged state exp(−K(t)) ψ.
    """
    K = micromotion(h, t).matrix
    return StateVector(scipy.linalg.expm(-K) @ psi.amplitudes, h.space)


class DressedObservable(collections.namedtuple(
        "DressedObservable", ("observable", "components"))):
    """
    An observable as seen by the averaged state, to second order,

      Ō(t) = O + Σ_c M_c exp(ict)

    with the slow part of ½[[O, K], K].  Its expectation in the averaged
    state tracks the filtered expectation of `O` in the exact state.

    @ivar components
      Tuple of `(matrix, frequency)`, one per distinct residual frequency.
    """

    def __repr__(self):
        return f"DressedObservable(<{len(self.components)} components>)"


    def at(self, t):
        matrix = self.observable.matrix.astype(complex)
        for M, frequency in self.components:
            matrix = matrix + np.exp(1j * frequency * t) * M
        return OperatorMatrix(matrix, self.observable.space)


    def values(self, amplitudes, t_grid):
        """
        Returns ⟨φ(t)|Ō(t)|φ(t)⟩ for the rows of `amplitudes`, one per time.
        """
        amplitudes = np.asarray(amplitudes)
        t_grid = np.asarray(t_grid, dtype=float)

        def expect(M):
            return np.sum(amplitudes.conj() * (amplitudes @ M.T), axis=1)

        values = expect(self.observable.matrix)
        for M, frequency in self.components:
            values = values + np.exp(1j * frequency * t_grid) * expect(M)
        return values.real if self.observable.hermitian else values



def dressed_observable(h, filter, observable):
    """
    Dresses `observable` with the micromotion of `h`.

    Only intra-domain pairs whose residual frequency `filter` keeps
    contribute; all other products of K oscillate and average out.

    @type observable
      `OperatorMatrix` on the space of `h`.
    @rtype
      `DressedObservable`.
    """
    if observable.space != h.space:
        raise DomainError("observable lives on a different space")
    O = observable.matrix
    s = h.hc_sign
    components = {}

    def add(frequency, M):
        if frequency in components:
            components[frequency] = components[frequency] + M
        else:
            components[frequency] = M

    for domain in DOMAINS:
        terms = h.terms(domain)
        for pair in kept_pairs(h, filter, domain):
            A_m = terms[pair.m].op.matrix / terms[pair.m].frequency
            A_n = terms[pair.n].op.matrix / terms[pair.n].frequency
            B_m = -s * A_m.conj().T
            B_n = -s * A_n.conj().T
            BA = B_m @ A_n
            AB = A_m @ B_n
            add(pair.combo, 0.5 * (O @ BA + BA @ O) - B_m @ O @ A_n)
            add(-pair.combo, 0.5 * (O @ AB + AB @ O) - A_m @ O @ B_n)

    return DressedObservable(
        observable, tuple( (M, f) for f, M in sorted(components.items()) ))


#-------------------------------------------------------------------------------

class GeneratorTerm(collections.namedtuple(
        "GeneratorTerm", ("coefficient", "left", "right", "frequency"))):
    """
    A second-order term with operators `left` = h†_m and `right` = h_n, the
    weight ±1/ω⁻_nm, and residual frequency ω_m − ω_n.
    """

    def __repr__(self):
        return f"GeneratorTerm({self.coefficient!r}, frequency={self.frequency!r})"



class SecondOrderGenerator:
    """
    The full second-order generator of the averaged Heisenberg dynamics,

      i dŌ/dt = −[H_eff, Ō] + Σ c_nm ({{h†_m, h_n}, Ō} − 2(h†_m Ō h_n + h_n Ō h†_m)) e^{i(ω_m−ω_n)t}

    For diagnostics only; scenario runs use `H_eff` alone.
    """

    def __init__(self, h, filter, anticommutator_terms, dissipator_terms):
        self.h = h
        self.filter = filter
        self.anticommutator_terms = tuple(anticommutator_terms)
        self.dissipator_terms = tuple(dissipator_terms)


    def __repr__(self):
        return (
            f"SecondOrderGenerator(<{len(self.anticommutator_terms)} anticommutator>, "
            f"<{len(self.dissipator_terms)} dissipator>)")


    @property
    def H_eff(self):
        return self.H_eff_at(0)


    def H_eff_at(self, t):
        return effective_hamiltonian(self.h, self.filter, t)


    def rhs(self, O, t):
        """
        Returns dŌ/dt as a matrix.

        @param O
          An `OperatorMatrix` or square array.
        """
        O = getattr(O, "matrix", O)
        H = self.H_eff_at(t).matrix
        result = -(H @ O - O @ H)
        for term in self.anticommutator_terms:
            a = term.left @ term.right + term.right @ term.left
            phase = np.exp(1j * term.frequency * t)
            result += term.coefficient * phase * (a @ O + O @ a)
        for term in self.dissipator_terms:
            l, r = term.left, term.right
            phase = np.exp(1j * term.frequency * t)
            result -= 2 * term.coefficient * phase * (l @ O @ r + r @ O @ l)
        return -1j * result


    def propagate(self, O, t_grid):
        """
        Integrates the averaged Heisenberg equation for `O` over `t_grid`.

        @return
          List of `OperatorMatrix`, one per time.
        """
        t_grid = _check_grid(t_grid)
        O = getattr(O, "matrix", O)
        shape = O.shape
        space = self.h.space

        def fun(t, y):
            return self.rhs(y.reshape(shape), t).ravel()

        solution = scipy.integrate.solve_ivp(
            fun, (t_grid[0], t_grid[-1]), O.astype(complex).ravel(),
            method="RK45", t_eval=t_grid, rtol=1e-8, atol=1e-10)
        if not solution.success:
            raise StiffnessError(t_grid[-1], None, solution.message)
        return [ OperatorMatrix(y.reshape(shape), space) for y in solution.y.T ]



def second_order_generator(h, filter):
    """
    Builds the full second-order generator of `h` under `filter`.

    Terms with n = m, or with equal frequencies, carry 1/ω⁻ = 0 and are
    omitted, so the term lists are empty when each domain holds a single
    frequency.
    """
    anticommutator_terms = []
    dissipator_terms = []
    for domain in DOMAINS:
        terms = h.terms(domain)
        for pair in kept_pairs(h, filter, domain):
            if pair.minus == 0:
                continue
            h_m, h_n = terms[pair.m].op.matrix, terms[pair.n].op.matrix
            term = GeneratorTerm(
                h.hc_sign * pair.minus, h_m.conj().T, h_n, pair.combo)
            anticommutator_terms.append(term)
            dissipator_terms.append(term)
    LOG.debug(f"second-order generator: {len(anticommutator_terms)} terms")
    return SecondOrderGenerator(h, filter, anticommutator_terms, dissipator_terms)


#-------------------------------------------------------------------------------
# Exact evolution oracle

def _check_grid(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise DomainError("time grid must be a non-empty list")
    if np.any(np.diff(t_grid) <= 0):
        raise DomainError("time grid not strictly increasing")
    return t_grid


def rotate(spectrum, times, vectors):
    """
    Applies exp(−iXt) to each row of `vectors`, one row per time.

    @param spectrum
      The spectrum of the hermitian X.
    @param vectors
      Array of shape `(len(times), dim)`.
    """
    coeffs = vectors @ spectrum.vectors.conj()
    coeffs = coeffs * np.exp(-1j * np.outer(times, spectrum.values))
    return coeffs @ spectrum.vectors.T


def _evolve_spectral(h, psi0, t_grid):
    """
    ψ_I(t) = exp(iGt) exp(−iH_S(t − t0)) exp(−iGt0) ψ_I(t0).
    """
    H_S = h.schrodinger().spectrum()
    G = h.frame.spectrum()
    t0 = t_grid[0]

    psi_S0 = rotate(G, np.array([t0]), psi0.amplitudes[None, :])
    psi_S = rotate(H_S, t_grid - t0, np.repeat(psi_S0, len(t_grid), axis=0))
    psi_I = rotate(G, -t_grid, psi_S)
    return psi_I


def _evolve_rk45(h, psi0, t_grid):
    H0 = h.H0.matrix
    terms = [
        (t.frequency, t.op.matrix, h.hc_sign * t.op.matrix.conj().T)
        for t in h.slow_terms + h.fast_terms
    ]

    def fun(t, y):
        dy = H0 @ y
        for frequency, op, op_hc in terms:
            phase = np.exp(-1j * frequency * t)
            dy += phase * (op @ y) + np.conj(phase) * (op_hc @ y)
        return -1j * dy

    amplitudes = np.empty((len(t_grid), len(psi0.amplitudes)), dtype=complex)
    amplitudes[0] = psi0.amplitudes
    if len(t_grid) == 1:
        return amplitudes

    solver = scipy.integrate.RK45(
        fun, t_grid[0], psi0.amplitudes.astype(complex), t_grid[-1],
        rtol=RK_TOLERANCE, atol=RK_TOLERANCE)
    i = 1
    steps = 0
    while solver.status == "running":
        t_prev = solver.t
        message = solver.step()
        steps += 1
        if solver.status == "failed":
            raise StiffnessError(solver.t, solver.step_size, message)
        # Fill every grid point inside the step just taken.
        j = i
        while j < len(t_grid) and t_grid[j] <= solver.t:
            j += 1
        if j > i:
            amplitudes[i : j] = solver.dense_output()(t_grid[i : j]).T
            i = j
        LOG.debug(f"RK45 step {steps}: t={t_prev}→{solver.t}")
    return amplitudes


def exact_evolve(h, psi0, t_grid, *, method="auto"):
    """
    Integrates i dψ/dt = H(t) ψ from `psi0` at `t_grid[0]`.

    @param method
      `"rk45"` uses adaptive 4th/5th-order stepping with local tolerance
      1e-10.  `"spectral"` uses the frame G attached to `h`, which is exact
      and independent of the number of fast periods.  `"auto"` picks
      spectral when a frame is attached.
    @return
      List of `StateVector`, one per grid time, in the picture of `h`.
    @raise StiffnessError
      The integrator failed to advance.
    """
    t_grid = _check_grid(t_grid)
    if psi0.space != h.space:
        raise DomainError("initial state lives on a different space")
    if method == "auto":
        method = "spectral" if h.frame is not None else "rk45"
    if method == "spectral":
        amplitudes = _evolve_spectral(h, psi0, t_grid)
    elif method == "rk45":
        amplitudes = _evolve_rk45(h, psi0, t_grid)
    else:
        raise DomainError("unknown evolution method", method)

    drift = float(np.max(np.abs(np.linalg.norm(amplitudes, axis=1) - psi0.norm)))
    if drift > NORM_DRIFT_TOLERANCE:
        LOG.warning(f"norm drift {drift:.3g} over {len(t_grid)} samples")
    else:
        LOG.debug(f"{method} evolution: norm drift {drift:.3g}")
    return [ StateVector(a, h.space) for a in amplitudes ]


#-------------------------------------------------------------------------------
# Filtering

class TimeSeries(collections.namedtuple("TimeSeries", ("times", "values"))):

    def __repr__(self):
        return f"TimeSeries(<{len(self.times)} samples>)"



def uniform_grid(t_grid, values):
    """
    Resamples `values` onto a uniform grid with the same count, if needed.

    @return
      `(times, values)`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    if len(steps) == 0 or np.ptp(steps) <= 1e-9 * np.mean(steps):
        return t_grid, values
    LOG.debug("resampling non-uniform grid")
    uniform = np.linspace(t_grid[0], t_grid[-1], len(t_grid))
    values = np.asarray(values)
    columns = values.reshape(len(t_grid), -1)
    resampled = np.column_stack([
        np.interp(uniform, t_grid, c.real) + 1j * np.interp(uniform, t_grid, c.imag)
        for c in columns.T
    ])
    if not np.iscomplexobj(values):
        resampled = resampled.real
    return uniform, resampled.reshape(values.shape)


def low_pass(values, dt, filter):
    """
    Convolves samples with the filter kernel along the first axis.

    The result is edge-truncated and renormalized by the kernel mass inside
    the trace, so that a constant is passed unchanged.

    @raise InsufficientDataError
      The trace is shorter than the kernel.
    """
    values = np.asarray(values)
    kernel = filter.kernel(dt)
    if len(values) < len(kernel):
        raise InsufficientDataError(len(values), len(kernel))
    shape = (-1, ) + (1, ) * (values.ndim - 1)
    kernel = kernel.reshape(shape)
    ones = np.ones((len(values), ) + (1, ) * (values.ndim - 1))
    filtered = scipy.signal.fftconvolve(values, kernel, mode="same", axes=0)
    mass = scipy.signal.fftconvolve(ones, kernel, mode="same", axes=0)
    return filtered / mass


def averaged_observable(trace, t_grid, filter, observable):
    """
    Returns the low-pass filtered expectation value ⟨ψ(t)|O|ψ(t)⟩.

    Non-uniform grids are resampled by linear interpolation first.

    @type trace
      Sequence of `StateVector`.
    @rtype
      `TimeSeries`.
    @raise InsufficientDataError
      The trace is shorter than the filter kernel.
    """
    if len(trace) != len(t_grid):
        raise DomainError("trace and time grid differ in length", (len(trace), len(t_grid)))
    values = np.array([ observable.expect(psi) for psi in trace ])
    if observable.hermitian:
        values = values.real
    times, values = uniform_grid(t_grid, values)
    if len(times) < 2:
        raise InsufficientDataError(len(times), 2)
    return TimeSeries(times, low_pass(values, times[1] - times[0], filter))


