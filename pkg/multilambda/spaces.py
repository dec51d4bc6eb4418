"""
Truncated Hilbert spaces and dense operator algebra.

The composite space is the tensor product

  atoms ⊗ photon mode a ⊗ photon mode b

where the atomic factor is a bosonic Fock space over a finite set of
single-particle orbitals (one orbital per internal level and external mode),
restricted to a chosen set of atom-number sectors, and each photon mode is a
Fock ladder truncated at `n_max`.

External modes come from one of two backends:

- the momentum ladder: each orbital carries a momentum label κ; plane-wave
  couplings e^{ikR} act as exact shifts κ → κ + k.

- the grid: each orbital carries a profile sampled on a quadrature grid;
  couplings act as multiplication operators evaluated by quadrature.

All objects are immutable after construction.
"""

#-------------------------------------------------------------------------------

import collections
import itertools
import logging
import math

import numpy as np
import scipy.linalg

from   .exc import DomainError, GridMisfitError
from   .lib.memo import memoize_method
from   .lib.py import format_ctor

LOG = logging.getLogger(__name__)

MODE_LABELS = ("a", "b")

HERMITIAN_TOLERANCE     = 1e-12
ORTHONORMAL_TOLERANCE   = 1e-10
MOMENTUM_TOLERANCE      = 1e-9
WINDING_TOLERANCE       = 1e-9
NORMALIZATION_TOLERANCE = 1e-12

#-------------------------------------------------------------------------------
# Photon ladders

class PhotonLadder(collections.namedtuple("PhotonLadder", ("n_max", "mode_label"))):
    """
    Fock ladder of one cavity mode, truncated at `n_max` photons.
    """

    def __new__(class_, n_max, mode_label):
        if int(n_max) != n_max or n_max < 1:
            raise DomainError("photon cutoff must be an integer ≥ 1", n_max)
        if mode_label not in MODE_LABELS:
            raise DomainError("unknown photon mode", mode_label)
        return super().__new__(class_, int(n_max), mode_label)


    def __repr__(self):
        return format_ctor(self, self.n_max, self.mode_label)


    @property
    def dim(self):
        return self.n_max + 1



class LightSpace(collections.namedtuple("LightSpace", ("ladder_a", "ladder_b"))):
    """
    The two-mode photon space, mode a ⊗ mode b.
    """

    @property
    def dim(self):
        return self.ladder_a.dim * self.ladder_b.dim


    def ladder(self, label):
        if label == "a":
            return self.ladder_a
        elif label == "b":
            return self.ladder_b
        else:
            raise DomainError("unknown photon mode", label)


    @memoize_method
    def annihilation(self, label):
        return tensor_embed(build_annihilation(self.ladder(label)), self)


    @memoize_method
    def creation(self, label):
        return self.annihilation(label).dag()


    @memoize_method
    def number(self, label):
        return tensor_embed(build_number(self.ladder(label)), self)


    @memoize_method
    def anti_number(self, label):
        """
        α̂α̂†, which equals n̂_α + 1 away from the truncation edge.
        """
        a = self.annihilation(label)
        return OperatorMatrix(a.matrix @ a.matrix.conj().T, self, hermitian=True)


    @memoize_method
    def unit(self, label):
        """
        [α̂, α̂†], the identity except at the truncation edge.
        """
        a = self.annihilation(label)
        return OperatorMatrix(
            a.matrix @ a.matrix.conj().T - a.matrix.conj().T @ a.matrix,
            self, hermitian=True)


    @memoize_method
    def identity(self):
        return OperatorMatrix(np.eye(self.dim), self, hermitian=True)


    @memoize_method
    def photon_numbers(self):
        """
        Arrays (n_a, n_b) of photon numbers per light basis index.
        """
        n_a, n_b = np.meshgrid(
            np.arange(self.ladder_a.dim), np.arange(self.ladder_b.dim),
            indexing="ij")
        return n_a.ravel(), n_b.ravel()



#-------------------------------------------------------------------------------
# Spatial modes and functions

class MomentumMode(collections.namedtuple("MomentumMode", ("kappa", ))):
    """
    A plane-wave external mode with momentum κ.
    """

    def __repr__(self):
        return format_ctor(self, self.kappa)



class GridMode(collections.namedtuple("GridMode", ("profile", ))):
    """
    An external mode with a profile sampled on a quadrature grid.
    """

    def __new__(class_, profile):
        return super().__new__(class_, np.asarray(profile, dtype=complex))


    def __repr__(self):
        return f"GridMode(<{len(self.profile)} samples>)"



class PlaneWave(collections.namedtuple("PlaneWave", ("amplitude", "k"))):
    """
    The spatial function `amplitude · exp(i k R)`.
    """

    def __repr__(self):
        return format_ctor(self, self.amplitude, self.k)


    def __mul__(self, other):
        if isinstance(other, PlaneWave):
            return PlaneWave(self.amplitude * other.amplitude, self.k + other.k)
        elif np.isscalar(other):
            return PlaneWave(self.amplitude * other, self.k)
        else:
            return NotImplemented


    __rmul__ = __mul__


    def conj(self):
        return PlaneWave(np.conj(self.amplitude), -self.k)


    def values(self, points):
        return self.amplitude * np.exp(1j * self.k * np.asarray(points))


    @property
    def magnitude(self):
        return abs(self.amplitude)



class Sampled:
    """
    A spatial function given by its values on a grid.
    """

    def __init__(self, values):
        self.values_ = np.asarray(values, dtype=complex)


    def __repr__(self):
        return f"Sampled(<{len(self.values_)} samples>)"


    def __mul__(self, other):
        if isinstance(other, Sampled):
            return Sampled(self.values_ * other.values_)
        elif np.isscalar(other):
            return Sampled(self.values_ * other)
        else:
            return NotImplemented


    __rmul__ = __mul__


    def conj(self):
        return Sampled(self.values_.conj())


    def values(self, points):
        if len(points) != len(self.values_):
            raise DomainError("sampled function does not match grid", len(points))
        return self.values_


    @property
    def magnitude(self):
        return float(np.max(np.abs(self.values_)))



#-------------------------------------------------------------------------------
# Quadrature grid

class Grid(collections.namedtuple("Grid", ("points", "weights", "periodic"))):
    """
    A one-dimensional quadrature grid.

    Periodic grids use uniform weights; bounded grids use the trapezoidal rule.
    """

    def __repr__(self):
        return f"Grid(<{len(self.points)} points>, periodic={self.periodic})"


    @classmethod
    def uniform(class_, length, count, *, periodic=True, origin=None):
        if length <= 0 or count < 2:
            raise DomainError("grid needs positive length and ≥ 2 points", (length, count))
        origin = -length / 2 if origin is None else origin
        if periodic:
            spacing = length / count
            points = origin + spacing * np.arange(count)
            weights = np.full(count, spacing)
        else:
            points = np.linspace(origin, origin + length, count)
            spacing = points[1] - points[0]
            weights = np.full(count, spacing)
            weights[0] = weights[-1] = spacing / 2
        return class_(points, weights, periodic)


    @property
    def spacing(self):
        return self.points[1] - self.points[0]


    @property
    def length(self):
        if self.periodic:
            return self.spacing * len(self.points)
        else:
            return self.points[-1] - self.points[0]


    def integrate(self, values):
        return np.sum(self.weights * values, axis=-1)


    def inner(self, f, g):
        return self.integrate(np.conj(f) * g)


    def laplacian(self, values):
        """
        Second derivative of sampled values.

        Spectral (FFT) on periodic grids; second-order central differences
        with zero boundary values otherwise.
        """
        values = np.asarray(values, dtype=complex)
        if self.periodic:
            k = 2 * np.pi * np.fft.fftfreq(len(self.points), d=self.spacing)
            return np.fft.ifft(-k ** 2 * np.fft.fft(values))
        else:
            padded = np.concatenate(([0], values, [0]))
            return (padded[2 :] - 2 * padded[1 : -1] + padded[: -2]) / self.spacing ** 2


    def plane_waves(self, kappas):
        """
        Orthonormal plane-wave profiles exp(iκx)/√L, one row per κ.

        @raise DomainError
          The grid isn't periodic, or some κL/2π isn't an integer, so the
          profile doesn't fit the box.
        """
        if not self.periodic:
            raise DomainError("plane-wave profiles need a periodic grid")
        kappas = np.asarray(kappas, dtype=float)
        windings = kappas * self.length / (2 * np.pi)
        misfit = np.abs(windings - np.round(windings)) > WINDING_TOLERANCE
        if np.any(misfit):
            raise GridMisfitError(float(kappas[misfit][0]), self.length)
        return np.exp(1j * np.outer(kappas, self.points)) / math.sqrt(self.length)



#-------------------------------------------------------------------------------
# Atomic modes

class AtomicModeSet:
    """
    Finite single-particle external modes per internal level.

    @ivar levels
      Internal level names, in orbital order.
    @ivar max_atoms
      Largest atom number the composite space may hold, 0, 1, or 2.
    @ivar backend
      `"ladder"` or `"grid"`.
    """

    def __init__(self, modes, *, max_atoms=2, grid=None):
        if max_atoms not in (0, 1, 2):
            raise DomainError("max_atoms must be 0, 1, or 2", max_atoms)
        modes = { str(l): tuple(m) for l, m in modes.items() }
        kinds = { type(m) for ms in modes.values() for m in ms }
        if kinds <= {MomentumMode}:
            backend = "ladder"
        elif kinds == {GridMode}:
            backend = "grid"
            if grid is None:
                raise DomainError("grid modes require a grid")
        else:
            raise DomainError("cannot mix mode kinds", sorted(k.__name__ for k in kinds))

        self.modes = modes
        self.levels = tuple(modes)
        self.max_atoms = max_atoms
        self.backend = backend
        self.grid = grid

        if backend == "ladder":
            for level, ms in modes.items():
                kappas = np.array([ m.kappa for m in ms ])
                diffs = np.abs(kappas[:, None] - kappas[None, :])
                np.fill_diagonal(diffs, np.inf)
                if len(ms) > 1 and diffs.min() < MOMENTUM_TOLERANCE:
                    raise DomainError("momentum labels not unique", level)
        else:
            for level in self.levels:
                profiles = self.profiles(level)
                if len(profiles) == 0:
                    continue
                gram = (profiles.conj() * grid.weights) @ profiles.T
                defect = np.max(np.abs(gram - np.eye(len(profiles))))
                if defect > ORTHONORMAL_TOLERANCE:
                    raise DomainError("mode profiles not orthonormal", (level, defect))


    @classmethod
    def ladder(class_, kappas, *, max_atoms=2):
        """
        Builds a momentum-ladder mode set from momentum labels per level.
        """
        return class_(
            { l: [ MomentumMode(float(k)) for k in ks ] for l, ks in kappas.items() },
            max_atoms=max_atoms)


    @classmethod
    def sampled(class_, grid, profiles, *, max_atoms=2):
        """
        Builds a grid mode set from sampled profiles, one row per mode.
        """
        return class_(
            { l: [ GridMode(p) for p in np.atleast_2d(ps) ] if len(ps) else []
              for l, ps in profiles.items() },
            max_atoms=max_atoms, grid=grid)


    def __repr__(self):
        counts = ", ".join( f"{l}: {len(m)}" for l, m in self.modes.items() )
        return f"AtomicModeSet({{{counts}}}, max_atoms={self.max_atoms}, backend={self.backend!r})"


    def n_modes(self, level):
        try:
            return len(self.modes[level])
        except KeyError:
            raise DomainError("unknown level", level) from None


    @property
    def n_orbitals(self):
        return sum( len(m) for m in self.modes.values() )


    @memoize_method
    def offsets(self):
        offsets = {}
        offset = 0
        for level in self.levels:
            offsets[level] = offset
            offset += len(self.modes[level])
        return offsets


    @memoize_method
    def orbitals(self):
        """
        The orbitals as `(level, mode index)` pairs, in orbital order.
        """
        return tuple(
            (l, i) for l in self.levels for i in range(len(self.modes[l])) )


    def orbital(self, level, index):
        """
        Returns the orbital number of mode `index` of `level`.

        @raise DomainError
          No such level or mode.
        """
        if not 0 <= index < self.n_modes(level):
            raise DomainError("unknown mode", (level, index))
        return self.offsets()[level] + index


    def kappas(self, level):
        if self.backend != "ladder":
            raise DomainError("momentum labels need the ladder backend")
        return np.array([ m.kappa for m in self.modes[level] ], dtype=float)


    def find(self, level, kappa):
        """
        Returns the index of the mode of `level` with momentum `kappa`.

        @raise DomainError
          No such mode.
        """
        kappas = self.kappas(level)
        hits = np.flatnonzero(np.abs(kappas - kappa) <= MOMENTUM_TOLERANCE * max(1, abs(kappa)))
        if len(hits) == 0:
            raise DomainError("no mode with this momentum", (level, kappa))
        return int(hits[0])


    def profiles(self, level):
        if self.backend != "grid":
            raise DomainError("profiles need the grid backend")
        ms = self.modes[level]
        if len(ms) == 0:
            return np.zeros((0, len(self.grid.points)), dtype=complex)
        return np.array([ m.profile for m in ms ])


    def product(self, f, g):
        """
        Pointwise product of two spatial functions.
        """
        if isinstance(f, PlaneWave) and isinstance(g, PlaneWave):
            return f * g
        if self.grid is None:
            raise DomainError("sampled functions need the grid backend")
        points = self.grid.points
        return Sampled(f.values(points) * g.values(points))


    def multiplication(self, fn, to_level, from_level):
        """
        Matrix of the multiplication operator `fn(R)` from the modes of
        `from_level` to the modes of `to_level`.

        @return
          Array of shape `(n_modes(to_level), n_modes(from_level))`.
        """
        n_to, n_from = self.n_modes(to_level), self.n_modes(from_level)
        if self.backend == "ladder":
            if not isinstance(fn, PlaneWave):
                raise DomainError("the momentum ladder needs plane-wave couplings", fn)
            k_to, k_from = self.kappas(to_level), self.kappas(from_level)
            target = k_from[None, :] + fn.k
            scale = MOMENTUM_TOLERANCE * np.maximum(1, np.abs(target))
            hit = np.abs(k_to[:, None] - target) <= scale
            return np.where(hit, fn.amplitude, 0).astype(complex)
        else:
            if n_to == 0 or n_from == 0:
                return np.zeros((n_to, n_from), dtype=complex)
            values = fn.values(self.grid.points)
            p_to, p_from = self.profiles(to_level), self.profiles(from_level)
            return (p_to.conj() * (self.grid.weights * values)) @ p_from.T


    def kinetic(self, level, mass, potential=None):
        """
        Matrix of the center-of-mass Hamiltonian P²/2M + V(R) on the modes of
        `level`.

        @param mass
          The atomic mass; `math.inf` gives zero kinetic energy.
        @param potential
          Optional potential values on the grid (grid backend only).
        """
        n = self.n_modes(level)
        inv_mass = 0 if math.isinf(mass) else 1 / mass
        if self.backend == "ladder":
            if potential is not None:
                raise DomainError("potentials need the grid backend", level)
            return np.diag(self.kappas(level) ** 2 * inv_mass / 2).astype(complex)
        if n == 0:
            return np.zeros((0, 0), dtype=complex)
        profiles = self.profiles(level)
        applied = np.array([ -self.grid.laplacian(p) * inv_mass / 2 for p in profiles ])
        if potential is not None:
            applied = applied + np.asarray(potential) * profiles
        matrix = (profiles.conj() * self.grid.weights) @ applied.T
        return (matrix + matrix.conj().T) / 2


    def embed_block(self, block, to_level, from_level):
        """
        Places a level-to-level block into a full orbital matrix.
        """
        n = self.n_orbitals
        full = np.zeros((n, n), dtype=complex)
        i, j = self.offsets()[to_level], self.offsets()[from_level]
        block = np.asarray(block)
        if block.shape != (self.n_modes(to_level), self.n_modes(from_level)):
            raise DomainError("block shape does not match levels", block.shape)
        full[i : i + block.shape[0], j : j + block.shape[1]] = block
        return full



#-------------------------------------------------------------------------------
# Atomic Fock space

class AtomSpace(collections.namedtuple("AtomSpace", ("n_orbitals", "sectors"))):
    """
    Bosonic occupation configurations of `n_orbitals` orbitals, restricted to
    the atom-number `sectors`.
    """

    def __new__(class_, n_orbitals, sectors):
        sectors = tuple(sorted(set(int(s) for s in sectors)))
        if not sectors or sectors[0] < 0:
            raise DomainError("invalid atom-number sectors", sectors)
        return super().__new__(class_, int(n_orbitals), sectors)


    @memoize_method
    def configs(self):
        configs = []
        for count in self.sectors:
            for occupied in itertools.combinations_with_replacement(
                    range(self.n_orbitals), count):
                config = [0] * self.n_orbitals
                for p in occupied:
                    config[p] += 1
                configs.append(tuple(config))
        return tuple(configs)


    @memoize_method
    def index(self):
        return { c: i for i, c in enumerate(self.configs()) }


    @property
    def dim(self):
        return len(self.configs())


    @memoize_method
    def occupations(self):
        """
        Array of shape `(dim, n_orbitals)` of occupation numbers.
        """
        return np.array(self.configs(), dtype=int).reshape(self.dim, self.n_orbitals)


    @memoize_method
    def annihilation(self, p):
        """
        Matrix of the annihilation operator of orbital `p`.

        Configurations whose image falls outside the kept sectors map to zero.
        """
        index = self.index()
        matrix = np.zeros((self.dim, self.dim))
        for col, config in enumerate(self.configs()):
            if config[p] > 0:
                image = config[: p] + (config[p] - 1, ) + config[p + 1 :]
                row = index.get(image)
                if row is not None:
                    matrix[row, col] = math.sqrt(config[p])
        return matrix


    def bilinear(self, M):
        """
        Matrix of Σ_pq M_pq a†_p a_q, built directly on configurations.

        Since the operator conserves atom number it is represented exactly in
        every kept sector.
        """
        M = np.asarray(M, dtype=complex)
        index = self.index()
        matrix = np.zeros((self.dim, self.dim), dtype=complex)
        rows, cols = np.nonzero(M)
        pairs = list(zip(rows.tolist(), cols.tolist()))
        if not pairs:
            return matrix
        for col, config in enumerate(self.configs()):
            for p, q in pairs:
                n_q = config[q]
                if n_q == 0:
                    continue
                image = list(config)
                image[q] -= 1
                factor = math.sqrt(n_q) * math.sqrt(image[p] + 1)
                image[p] += 1
                row = index[tuple(image)]
                matrix[row, col] += M[p, q] * factor
        return matrix


    def state(self, occupations):
        """
        Vector of the configuration with the given `{orbital: count}`.
        """
        config = [0] * self.n_orbitals
        for p, n in occupations.items():
            config[p] += n
        vector = np.zeros(self.dim, dtype=complex)
        try:
            vector[self.index()[tuple(config)]] = 1
        except KeyError:
            raise DomainError("configuration outside the kept sectors", tuple(config)) from None
        return vector



#-------------------------------------------------------------------------------
# Composite basis

class BasisState(collections.namedtuple("BasisState", ("config", "n_a", "n_b"))):
    """
    One composite basis state: atom occupation configuration and photon
    numbers.
    """

    def __repr__(self):
        return format_ctor(self, self.config, self.n_a, self.n_b)



class CompositeBasis:
    """
    The truncated composite space atoms ⊗ photons a ⊗ photons b.

    @ivar modes
      The `AtomicModeSet`.
    @ivar atoms
      The `AtomSpace` of occupation configurations.
    @ivar light
      The `LightSpace`.
    """

    def __init__(self, modes, ladder_a, ladder_b, *, sectors=None):
        if ladder_a.mode_label != "a" or ladder_b.mode_label != "b":
            raise DomainError("ladders must be for modes a and b")
        if sectors is None:
            sectors = range(modes.max_atoms + 1)
        sectors = tuple(sorted(set(sectors)))
        if any( not 0 <= s <= modes.max_atoms for s in sectors ):
            raise DomainError("sector outside 0..max_atoms", sectors)
        self.modes = modes
        self.atoms = AtomSpace(modes.n_orbitals, sectors)
        self.light = LightSpace(ladder_a, ladder_b)
        LOG.debug(f"composite basis: {self.atoms.dim} atom × {self.light.dim} light")


    def __repr__(self):
        return (
            f"CompositeBasis({self.modes!r}, n_max=({self.light.ladder_a.n_max}, "
            f"{self.light.ladder_b.n_max}), sectors={self.atoms.sectors})")


    @property
    def dim(self):
        return self.atoms.dim * self.light.dim


    @property
    def sectors(self):
        return self.atoms.sectors


    @memoize_method
    def states(self):
        n_a, n_b = self.light.photon_numbers()
        return tuple(
            BasisState(c, int(a), int(b))
            for c in self.atoms.configs()
            for a, b in zip(n_a, n_b)
        )


    @memoize_method
    def _index(self):
        return { s: i for i, s in enumerate(self.states()) }


    def index(self, state):
        try:
            return self._index()[state]
        except KeyError:
            raise DomainError("state not in basis", state) from None


    @memoize_method
    def photon_numbers(self):
        """
        Arrays (n_a, n_b) of photon numbers per composite index.
        """
        n_a, n_b = self.light.photon_numbers()
        return np.tile(n_a, self.atoms.dim), np.tile(n_b, self.atoms.dim)


    @memoize_method
    def level_counts(self):
        """
        Array of shape `(dim, n_levels)` of atoms per internal level.
        """
        occupations = self.atoms.occupations()
        counts = np.zeros((self.atoms.dim, len(self.modes.levels)), dtype=int)
        offsets = self.modes.offsets()
        for i, level in enumerate(self.modes.levels):
            n = self.modes.n_modes(level)
            counts[:, i] = occupations[:, offsets[level] : offsets[level] + n].sum(axis=1)
        return np.repeat(counts, self.light.dim, axis=0)


    def config_label(self, config):
        """
        The internal-state label of a configuration, e.g. `"ab"` or `"bb"`.
        """
        label = []
        for (level, _), n in zip(self.modes.orbitals(), config):
            label.extend([level] * n)
        return "".join(sorted(label)) or "0"


    @memoize_method
    def labels(self):
        """
        Internal-state label per composite index.
        """
        return tuple( self.config_label(s.config) for s in self.states() )


    def product_state(self, atom_vector, light_vector):
        """
        Kronecker product of an atom-space and a light-space vector.
        """
        return StateVector(np.kron(atom_vector, light_vector), self)


    def operator(self, atom_matrix, light_matrix, *, hermitian=False):
        """
        Kronecker product of an atom-space and a light-space matrix.
        """
        return OperatorMatrix(
            np.kron(atom_matrix, light_matrix), self, hermitian=hermitian)



#-------------------------------------------------------------------------------
# Operators and states

class Spectrum(collections.namedtuple("Spectrum", ("values", "vectors"))):
    """
    Eigenvalues and orthonormal eigenvectors (columns) of a hermitian matrix.
    """

    def apply(self, fn):
        """
        Returns the matrix V f(Λ) V†.
        """
        return (self.vectors * fn(self.values)) @ self.vectors.conj().T



def hermiticity_defect(matrix):
    """
    Returns ‖H − H†‖_max relative to ‖H‖_max.
    """
    scale = np.max(np.abs(matrix)) if matrix.size else 0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T)) / scale)


class OperatorMatrix:
    """
    A dense complex operator on a space.

    @ivar matrix
      The square complex array.
    @ivar space
      Any space object with a `dim`.
    @ivar hermitian
      True if the operator is asserted hermitian; checked on construction.
    """

    def __init__(self, matrix, space, hermitian=False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (space.dim, space.dim):
            raise DomainError("operator shape does not match space", matrix.shape)
        if hermitian:
            defect = hermiticity_defect(matrix)
            if defect > HERMITIAN_TOLERANCE:
                raise DomainError("operator is not hermitian", defect)
        self.matrix = matrix
        self.space = space
        self.hermitian = bool(hermitian)


    def __repr__(self):
        return f"OperatorMatrix(<{self.space.dim}×{self.space.dim}>, hermitian={self.hermitian})"


    def _check(self, other):
        if not (other.space is self.space or other.space == self.space):
            raise DomainError("operators live on different spaces")


    def __add__(self, other):
        self._check(other)
        return OperatorMatrix(
            self.matrix + other.matrix, self.space,
            self.hermitian and other.hermitian)


    def __sub__(self, other):
        self._check(other)
        return OperatorMatrix(
            self.matrix - other.matrix, self.space,
            self.hermitian and other.hermitian)


    def __neg__(self):
        return OperatorMatrix(-self.matrix, self.space, self.hermitian)


    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return OperatorMatrix(
            scalar * self.matrix, self.space,
            self.hermitian and np.isreal(scalar))


    __rmul__ = __mul__


    def __matmul__(self, other):
        if isinstance(other, StateVector):
            self._check(other)
            return StateVector(self.matrix @ other.amplitudes, self.space)
        self._check(other)
        return OperatorMatrix(self.matrix @ other.matrix, self.space)


    def dag(self):
        return OperatorMatrix(self.matrix.conj().T, self.space, self.hermitian)


    def comm(self, other):
        """
        Returns the commutator [self, other].
        """
        self._check(other)
        return OperatorMatrix(
            self.matrix @ other.matrix - other.matrix @ self.matrix, self.space)


    def anticomm(self, other):
        self._check(other)
        return OperatorMatrix(
            self.matrix @ other.matrix + other.matrix @ self.matrix, self.space)


    def expect(self, psi):
        """
        Returns ⟨ψ|O|ψ⟩.
        """
        self._check(psi)
        return np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes)


    def norm(self):
        """
        The Frobenius norm.
        """
        return float(np.linalg.norm(self.matrix))


    def defect(self):
        return hermiticity_defect(self.matrix)


    def restrict(self, indices):
        """
        Returns the submatrix on the given basis indices.
        """
        indices = np.asarray(indices)
        return self.matrix[np.ix_(indices, indices)]


    def hermitized(self):
        """
        Returns (O + O†)/2 flagged hermitian.
        """
        return OperatorMatrix(
            (self.matrix + self.matrix.conj().T) / 2, self.space, hermitian=True)


    @memoize_method
    def spectrum(self):
        """
        The spectral decomposition.

        @raise DomainError
          The operator is not hermitian.
        """
        if not self.hermitian and self.defect() > HERMITIAN_TOLERANCE:
            raise DomainError("spectral decomposition needs a hermitian operator", self.defect())
        values, vectors = scipy.linalg.eigh(self.matrix)
        return Spectrum(values, vectors)



class StateVector:
    """
    Complex amplitudes over the states of a space.

    @ivar norm
      The 2-norm, computed once.
    """

    def __init__(self, amplitudes, space):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (space.dim, ):
            raise DomainError("state length does not match space", amplitudes.shape)
        self.amplitudes = amplitudes
        self.space = space
        self.norm = float(np.linalg.norm(amplitudes))


    def __repr__(self):
        return f"StateVector(<{self.space.dim}>, norm={self.norm!r})"


    def probabilities(self):
        return np.abs(self.amplitudes) ** 2



#-------------------------------------------------------------------------------

def build_annihilation(ladder):
    """
    Returns the photon annihilation operator on a ladder, ⟨n−1|â|n⟩ = √n.
    """
    return OperatorMatrix(
        np.diag(np.sqrt(np.arange(1, ladder.dim)), k=1), ladder)


def build_number(ladder):
    return OperatorMatrix(np.diag(np.arange(ladder.dim)), ladder, hermitian=True)


def tensor_embed(op, target):
    """
    Embeds a local operator into a product space.

    @param op
      An operator on a `PhotonLadder`, the `LightSpace`, or the `AtomSpace`.
    @param target
      A `LightSpace` or `CompositeBasis` containing the space of `op`.
    @raise DomainError
      The space of `op` is not a factor of `target`.
    """
    space = op.space
    if isinstance(target, LightSpace):
        if space == target.ladder_a:
            matrix = np.kron(op.matrix, np.eye(target.ladder_b.dim))
        elif space == target.ladder_b:
            matrix = np.kron(np.eye(target.ladder_a.dim), op.matrix)
        else:
            raise DomainError("operator is not on a factor of the light space", space)
        return OperatorMatrix(matrix, target, op.hermitian)

    if isinstance(target, CompositeBasis):
        if space == target.atoms:
            return target.operator(op.matrix, np.eye(target.light.dim), hermitian=op.hermitian)
        if isinstance(space, PhotonLadder):
            op = tensor_embed(op, target.light)
            space = op.space
        if space == target.light:
            return target.operator(np.eye(target.atoms.dim), op.matrix, hermitian=op.hermitian)

    raise DomainError("operator is not on a factor of the target space", space)


def build_field_op(level, mode, kind, basis):
    """
    Returns the atomic field operator ψ̂_{level,mode} or its adjoint.

    @param kind
      `"annihilate"` or `"create"`.
    @raise DomainError
      Unknown level, mode, or kind.
    """
    p = basis.modes.orbital(level, mode)
    a = basis.atoms.annihilation(p)
    if kind == "annihilate":
        matrix = a
    elif kind == "create":
        matrix = a.T
    else:
        raise DomainError("unknown field operator kind", kind)
    return basis.operator(matrix, np.eye(basis.light.dim))


def inner_product(psi, phi):
    """
    Returns ⟨ψ|φ⟩.
    """
    if not (psi.space is phi.space or psi.space == phi.space):
        raise DomainError("states live on different spaces")
    return np.vdot(psi.amplitudes, phi.amplitudes)


def normalize(psi):
    """
    Returns ψ/‖ψ‖.

    @raise DomainError
      ψ is zero.
    """
    if psi.norm == 0:
        raise DomainError("cannot normalize the zero vector")
    if abs(psi.norm - 1) <= NORMALIZATION_TOLERANCE / 2:
        return psi
    return StateVector(psi.amplitudes / psi.norm, psi.space)


def matrix_function(op, fn):
    """
    Applies `fn` to the eigenvalues of a hermitian operator.

    The result is flagged hermitian when `fn` is real on the spectrum.

    @raise DomainError
      `op` is not hermitian.
    """
    spectrum = op.spectrum()
    values = fn(spectrum.values)
    matrix = (spectrum.vectors * values) @ spectrum.vectors.conj().T
    return OperatorMatrix(matrix, op.space, hermitian=np.isrealobj(values))


def cosine(theta):
    """
    The function x ↦ cos(ϑx).
    """
    return lambda x: np.cos(theta * x)


def sinc(theta):
    """
    The function x ↦ sin(ϑx)/x, with its limit ϑ at x = 0.
    """
    return lambda x: theta * np.sinc(theta * np.asarray(x) / np.pi)


def propagator(theta):
    """
    The function x ↦ exp(−iϑx).
    """
    return lambda x: np.exp(-1j * theta * np.asarray(x))


