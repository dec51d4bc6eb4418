"""
YAML simulation configs.

A config file is a mapping of sections, validated against a strict nested
field table: unknown keys are errors, and every error names the dotted path
of the offending field.  See `notes/config.md` for the schema.

  config = load_config("configs/hom.yaml")
  model = build_model(config)

"""

#-------------------------------------------------------------------------------

import collections
import copy
import logging
import math
from   pathlib import Path

import numpy as np
import yaml

from   .exc import ConfigError, DomainError, GridMisfitError
from   .lambda_model import CouplingSet, LambdaModel, LevelScheme
from   .lambda_model import OpticalMode, Transition, raman_ladder
from   .lib.py import format_ctor
from   .spaces import AtomicModeSet, CompositeBasis, Grid, MODE_LABELS, PhotonLadder

LOG = logging.getLogger(__name__)

SCENARIOS = ("single", "hom")

SWEEP_PARAMETERS = ("theta", "angle", "detuning", "n_a", "n_b")

METRICS = (
    "coincidence",
    "norm_defect",
    "unitarity_defect",
    "truncation",
    "rabi_error",
    "random_norm_defect",
    "oracle_delta",
    "pulse_delta",
)

#-------------------------------------------------------------------------------
# Field checks
#
# Each check takes the raw value and its dotted field path, and returns the
# converted value or raises `ConfigError`.

def _number(value, field):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=field)
    return float(value)


def _finite(value, field):
    value = _number(value, field)
    if not math.isfinite(value):
        raise ConfigError(f"must be finite, got {value!r}", field=field)
    return value


def _positive(value, field):
    value = _number(value, field)
    if not value > 0:
        raise ConfigError(f"must be positive, got {value!r}", field=field)
    return value


def _nonnegative(value, field):
    value = _finite(value, field)
    if value < 0:
        raise ConfigError(f"must not be negative, got {value!r}", field=field)
    return value


def _integer(low=None, high=None):
    def check(value, field):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=field)
        if (low is not None and value < low) or (high is not None and value > high):
            raise ConfigError(f"{value} outside [{low}, {high}]", field=field)
        return value

    return check


def _string(value, field):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        # YAML reads level names like 3 as numbers.
        return str(value)
    if not isinstance(value, str) or value == "":
        raise ConfigError(f"expected a name, got {value!r}", field=field)
    return value


def _boolean(value, field):
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", field=field)
    return value


def _choice(*choices):
    def check(value, field):
        if value not in choices:
            raise ConfigError(
                f"{value!r} not one of {', '.join(map(str, choices))}", field=field)
        return value

    return check


def _optional(check):
    def optional(value, field):
        return None if value is None else check(value, field)

    return optional


def _complex(value, field):
    """
    A number, or a `[re, im]` pair.
    """
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError("expected [re, im]", field=field)
        return complex(_finite(value[0], field), _finite(value[1], field))
    return complex(_finite(value, field))


def _pair(check):
    def pair(value, field):
        if not isinstance(value, list) or len(value) != 2:
            raise ConfigError(f"expected a pair, got {value!r}", field=field)
        return [ check(v, f"{field}[{i}]") for i, v in enumerate(value) ]

    return pair


def _list(check):
    def checked(value, field):
        if not isinstance(value, list) or len(value) == 0:
            raise ConfigError(f"expected a nonempty list, got {value!r}", field=field)
        return [ check(v, f"{field}[{i}]") for i, v in enumerate(value) ]

    return checked


#-------------------------------------------------------------------------------
# Schema nodes

REQUIRED = object()

class Field(collections.namedtuple("Field", ("check", "default"))):
    """
    A leaf value; `default` is `REQUIRED` if the field must be given.
    """

    def validate(self, value, field):
        return self.check(value, field)


    def missing(self, field):
        if self.default is REQUIRED:
            raise ConfigError("missing required field", field=field)
        return copy.deepcopy(self.default)



class Section(collections.namedtuple("Section", ("fields", "required"))):
    """
    A mapping with a fixed set of keys.
    """

    def __new__(class_, fields, required=False):
        return super().__new__(class_, fields, required)


    def validate(self, value, field):
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping, got {value!r}", field=field)
        for key in value:
            if key not in self.fields:
                raise ConfigError("unknown key", field=_join(field, key))
        return {
            key: (
                node.validate(value[key], _join(field, key)) if key in value
                else node.missing(_join(field, key))
            )
            for key, node in self.fields.items()
        }


    def missing(self, field):
        if self.required:
            raise ConfigError("missing required section", field=field)
        return self.validate({}, field)



class Table(collections.namedtuple("Table", ("key", "item", "required"))):
    """
    A mapping with arbitrary keys, each checked by `key`.
    """

    def __new__(class_, key, item, required=False):
        return super().__new__(class_, key, item, required)


    def validate(self, value, field):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping, got {value!r}", field=field)
        return {
            self.key(k, _join(field, str(k))):
                self.item.validate(v, _join(field, str(k)))
            for k, v in value.items()
        }


    def missing(self, field):
        if self.required:
            raise ConfigError("missing required section", field=field)
        return {}



class Sequence(collections.namedtuple("Sequence", ("item", "required"))):

    def __new__(class_, item, required=False):
        return super().__new__(class_, item, required)


    def validate(self, value, field):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", field=field)
        return [ self.item.validate(v, f"{field}[{i}]") for i, v in enumerate(value) ]


    def missing(self, field):
        if self.required:
            raise ConfigError("missing required section", field=field)
        return []



def _join(field, key):
    return str(key) if field is None else f"{field}.{key}"


MODE = Section({
    "frequency" : Field(_positive, REQUIRED),
    "amplitude" : Field(_finite, 1.0),
    "k"         : Field(_finite, 0.0),
}, required=True)

ATOM = {
    "level"     : Field(_choice(*MODE_LABELS), "a"),
    "kappa"     : Field(_finite, 0.0),
    "sigma"     : Field(_optional(_positive), None),
}

SCHEMA = Section({
    "units": Section({
        "frequency" : Field(_string, REQUIRED),
        "reference" : Field(_positive, REQUIRED),
    }, required=True),
    "levels"    : Table(_string, Field(_finite, REQUIRED), required=True),
    "mass"      : Field(_positive, math.inf),
    "light"     : Section({ "a": MODE, "b": MODE }, required=True),
    "transitions": Sequence(Section({
        "ancilla"   : Field(_string, REQUIRED),
        "level"     : Field(_choice(*MODE_LABELS), REQUIRED),
        "dipole"    : Field(_finite, REQUIRED),
        "phase"     : Field(_finite, 0.0),
    }), required=True),
    "basis": Section({
        "n_max"     : Field(_integer(1), 8),
        "dimension" : Field(_choice(1, 3), 1),
        "backend"   : Field(_choice("ladder", "grid"), "ladder"),
        "max_atoms" : Field(_integer(0, 2), 2),
        "momentum_span": Field(_integer(0), 4),
        "steps"     : Field(_integer(1), 2),
        "sectors"   : Field(_optional(_list(_integer(0, 2))), None),
        "grid"      : Field(_optional(Section({
            "length"    : Field(_positive, REQUIRED),
            "count"     : Field(_integer(2), REQUIRED),
            "profiles"  : Field(_optional(_string), None),
        }).validate), None),
    }),
    "filter": Section({
        "cutoff"    : Field(_positive, 2.0),
        "window"    : Field(_choice("gaussian", "ideal"), "gaussian"),
        "width"     : Field(_optional(_positive), None),
    }),
    "pulse": Section({
        "theta"     : Field(_optional(_nonnegative), None),
        "angle"     : Field(_optional(_nonnegative), None),
        "area"      : Field(_optional(_nonnegative), None),
        "strength"  : Field(_positive, 1.0),
        "instant"   : Field(_finite, 0.0),
        "method"    : Field(_choice("delta", "exact"), "delta"),
    }),
    "scenario": Section({
        "name"      : Field(_choice(*SCENARIOS), "single"),
        "atom"      : Section(ATOM),
        "second"    : Field(_optional(Section(ATOM).validate), None),
        "light": Section({
            "fock"      : Field(_optional(_pair(_integer(0))), None),
            "coherent"  : Field(_optional(_pair(_complex)), None),
        }),
        "optical_limit": Field(_boolean, False),
    }),
    "sweep": Field(_optional(Section({
        "parameter" : Field(_choice(*SWEEP_PARAMETERS), REQUIRED),
        "start"     : Field(_finite, REQUIRED),
        "step"      : Field(_positive, REQUIRED),
        "stop"      : Field(_finite, REQUIRED),
    }).validate), None),
    "approximations": Section({
        "rwa"       : Field(_boolean, False),
        "co_rotating": Field(_boolean, True),
    }),
    "oracle": Section({
        "dt"        : Field(_positive, 0.25),
        "duration"  : Field(_optional(_positive), None),
    }),
    "output": Section({
        "dir"       : Field(_string, "results"),
        "name"      : Field(_optional(_string), None),
        "format"    : Field(_choice("csv", "jsonl"), "csv"),
    }),
    "check"     : Table(_choice(*METRICS), Field(_nonnegative, REQUIRED)),
    "seed"      : Field(_integer(0), 0),
})

#-------------------------------------------------------------------------------

def _cross_check(data):
    """
    Checks references between sections.
    """
    levels = data["levels"]
    for label in MODE_LABELS:
        if label not in levels:
            raise ConfigError("missing relevant level", field=f"levels.{label}")
    ancillas = [ l for l in levels if l not in MODE_LABELS ]
    if not ancillas:
        raise ConfigError("need at least one ancilla level", field="levels")
    for i, transition in enumerate(data["transitions"]):
        if transition["ancilla"] not in ancillas:
            raise ConfigError(
                f"no ancilla {transition['ancilla']!r}",
                field=f"transitions[{i}].ancilla")
    if not data["transitions"]:
        raise ConfigError("need at least one transition", field="transitions")

    pulse = data["pulse"]
    given = [ k for k in ("theta", "angle", "area") if pulse[k] is not None ]
    if len(given) != 1:
        raise ConfigError("give exactly one of theta, angle, area", field="pulse")

    basis = data["basis"]
    if (basis["backend"] == "grid") != (basis["grid"] is not None):
        raise ConfigError("basis.grid goes with the grid backend", field="basis.grid")

    scenario = data["scenario"]
    light = scenario["light"]
    if light["fock"] is not None and light["coherent"] is not None:
        raise ConfigError("give fock or coherent light, not both", field="scenario.light")
    if scenario["name"] == "hom" and basis["max_atoms"] < 2:
        raise ConfigError("hom scenario needs max_atoms 2", field="basis.max_atoms")
    if scenario["name"] == "hom" and pulse["method"] != "delta":
        raise ConfigError("hom runs use the delta pulse", field="pulse.method")
    if scenario["name"] == "single" and scenario["second"] is not None:
        raise ConfigError("single scenario takes one atom", field="scenario.second")

    sweep = data["sweep"]
    if sweep is not None:
        if sweep["stop"] < sweep["start"]:
            raise ConfigError("stop precedes start", field="sweep.stop")
        if sweep["parameter"] in ("n_a", "n_b"):
            if light["coherent"] is not None:
                raise ConfigError(
                    "photon-number sweeps need fock light", field="sweep.parameter")
            for key in ("start", "step", "stop"):
                if sweep[key] != int(sweep[key]):
                    raise ConfigError("photon numbers are integers", field=f"sweep.{key}")



class SimulationConfig:
    """
    A validated config, with defaults applied.

    @ivar raw
      The config as parsed, before validation.
    @ivar data
      Nested dict of sections, with defaults filled in.
    @ivar path
      The file it was read from, or `None`.
    """

    def __init__(self, raw, path=None):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping", path=path)
        try:
            data = SCHEMA.validate(raw, None)
            _cross_check(data)
        except ConfigError as exc:
            if exc.path is None and path is not None:
                raise ConfigError(exc.message, path=path, field=exc.field) from None
            raise
        self.raw = copy.deepcopy(raw)
        self.data = data
        self.path = path


    def __repr__(self):
        return format_ctor(self, str(self.path) if self.path else None)


    def __getitem__(self, section):
        return self.data[section]


    @property
    def scenario(self):
        return self.data["scenario"]["name"]


    @property
    def rwa(self):
        return self.data["approximations"]["rwa"]


    @property
    def recoil(self):
        """
        The two-photon recoil K = k_a − k_b.
        """
        light = self.data["light"]
        return light["a"]["k"] - light["b"]["k"]


    @property
    def fock(self):
        """
        The Fock pair of the optical input, or `None` for coherent light.
        """
        light = self.data["scenario"]["light"]
        if light["coherent"] is not None:
            return None
        if light["fock"] is not None:
            return tuple(light["fock"])
        return (1, 1) if self.scenario == "hom" else (1, 0)


    @property
    def sectors(self):
        sectors = self.data["basis"]["sectors"]
        if sectors is not None:
            return tuple(sectors)
        return (2, ) if self.scenario == "hom" else (1, )


    def atoms(self):
        """
        The atom specs of the scenario, with the default second HOM atom
        in the other level one recoil away.
        """
        first = self.data["scenario"]["atom"]
        if self.scenario == "single":
            return [first]
        second = self.data["scenario"]["second"]
        if second is None:
            other = "b" if first["level"] == "a" else "a"
            shift = self.recoil if other == "b" else -self.recoil
            second = dict(first, level=other, kappa=first["kappa"] + shift)
        return [first, second]


    def with_values(self, updates):
        """
        Returns a new config with dotted fields replaced and revalidated.

          config.with_values({"scenario.name": "hom", "seed": 3})

        """
        raw = copy.deepcopy(self.raw)
        for dotted, value in updates.items():
            *parents, key = dotted.split(".")
            section = raw
            for i, name in enumerate(parents):
                section = section.setdefault(name, {})
                if not isinstance(section, dict):
                    raise ConfigError(
                        "not a section", path=self.path, field=".".join(parents[: i + 1]))
            section[key] = value
        return type(self)(raw, self.path)


    def echo(self):
        """
        The validated config as JSON-ready data.
        """
        return _jsonable(self.data)



def _jsonable(value):
    if isinstance(value, dict):
        return { str(k): _jsonable(v) for k, v in value.items() }
    if isinstance(value, (list, tuple)):
        return [ _jsonable(v) for v in value ]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def parse_config(text, path=None):
    """
    Parses and validates config text.

    @raise ConfigError
      The text is not valid YAML, with the line and column of the problem,
      or fails validation, with the dotted path of the field.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is None:
            raise ConfigError(problem, path=path) from None
        raise ConfigError(
            problem, path=path, line=mark.line + 1, column=mark.column + 1) from None
    if raw is None:
        raise ConfigError("config is empty", path=path)
    return SimulationConfig(raw, path)


def load_config(path):
    """
    Reads and validates a config file.

    @raise ConfigError
      The file is not valid YAML or fails validation.
    @raise OSError
      The file can't be read.
    """
    path = Path(path)
    with open(path) as file:
        text = file.read()
    config = parse_config(text, path)
    LOG.info(f"loaded config {path}: scenario {config.scenario}")
    return config


#-------------------------------------------------------------------------------
# Model construction

def build_levels(config):
    return LevelScheme(config["levels"], mass=config["mass"])


def build_couplings(config):
    light = config["light"]
    approximations = config["approximations"]
    return CouplingSet(
        [ OpticalMode(l, m["frequency"], m["amplitude"], k=m["k"])
          for l, m in sorted(light.items()) ],
        [ Transition(t["ancilla"], t["level"], t["dipole"], t["phase"])
          for t in config["transitions"] ],
        rwa=approximations["rwa"], co_rotating=approximations["co_rotating"])


def ladder_momenta(config, levels=None, couplings=None):
    """
    The momentum labels per level reachable from the scenario's atoms.

    Each atom contributes the a-level momentum its state connects to; wave
    packets contribute the whole span of momenta they are expanded over.
    """
    levels = build_levels(config) if levels is None else levels
    couplings = build_couplings(config) if couplings is None else couplings
    K = config.recoil
    span = config["basis"]["momentum_span"]
    starts = set()
    for atom in config.atoms():
        offsets = range(-span, span + 1) if atom["sigma"] is not None and K != 0 else [0]
        for m in offsets:
            kappa = atom["kappa"] + m * K
            starts.add(kappa if atom["level"] == "a" else kappa - K)
    return raman_ladder(
        levels, couplings, kappa0=sorted(starts),
        steps=config["basis"]["steps"], counter=not config.rwa)


def load_profiles(config, kappas):
    """
    Loads user-supplied sampled mode profiles for the grid backend.

    The archive named by `basis.grid.profiles` holds one array per level,
    of shape (modes, count).  Row i stands in for the plane wave at the
    level's i-th ladder momentum, which remains its label.  The path is
    relative to the config file.

    @return
      Dict from level to profile array; empty without an archive.
    @raise ConfigError
      The archive can't be read, names an unknown level, or has the
      wrong shape.
    """
    grid = config["basis"]["grid"]
    if grid is None or grid["profiles"] is None:
        return {}
    path = Path(grid["profiles"])
    if config.path is not None and not path.is_absolute():
        path = Path(config.path).parent / path
    field = "basis.grid.profiles"

    try:
        with np.load(path) as archive:
            profiles = { l: np.asarray(archive[l], dtype=complex) for l in archive.files }
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(
            f"can't read profiles {path}: {exc}", path=config.path, field=field) from None

    for level, rows in profiles.items():
        if level not in kappas:
            raise ConfigError(
                f"profiles for unknown level {level!r}", path=config.path, field=field)
        shape = (len(kappas[level]), grid["count"])
        if rows.shape != shape:
            raise ConfigError(
                f"profiles for level {level!r} have shape {rows.shape}, not {shape}",
                path=config.path, field=field)
    LOG.info(f"loaded profiles for levels {', '.join(sorted(profiles))} from {path}")
    return profiles


def build_model(config):
    """
    Builds the `LambdaModel` a config describes.

    @raise ConfigError
      The model is inconsistent; the message names the failing part.
    """
    basis = config["basis"]
    try:
        levels = build_levels(config)
        couplings = build_couplings(config)
        kappas = ladder_momenta(config, levels, couplings)
        if basis["backend"] == "ladder":
            modes = AtomicModeSet.ladder(kappas, max_atoms=basis["max_atoms"])
        else:
            profiles = load_profiles(config, kappas)
            grid = Grid.uniform(basis["grid"]["length"], basis["grid"]["count"])
            try:
                modes = AtomicModeSet.sampled(
                    grid,
                    { l: profiles[l] if l in profiles else grid.plane_waves(ks)
                      for l, ks in kappas.items() },
                    max_atoms=basis["max_atoms"])
            except GridMisfitError as exc:
                raise ConfigError(
                    str(exc), path=config.path, field="basis.grid.length") from exc
            except DomainError as exc:
                if not profiles:
                    raise
                raise ConfigError(
                    str(exc), path=config.path, field="basis.grid.profiles") from exc
        composite = CompositeBasis(
            modes,
            PhotonLadder(basis["n_max"], "a"), PhotonLadder(basis["n_max"], "b"),
            sectors=config.sectors)
        model = LambdaModel(levels, couplings, composite)
    except DomainError as exc:
        raise ConfigError(str(exc), path=config.path) from exc
    LOG.info(f"built model with {composite.dim} basis states")
    return model


