"""
Runs configured scenarios and writes their result tables.

A run produces one row per sweep point (one row without a sweep).  Tables
are written as CSV with a header row, or as JSON lines with one record per
row; a metadata file next to the table holds the config echo, the
approximation provenance, and any oracle deltas.  Wall time goes to the log
only, so identical configs produce identical files.
"""

#-------------------------------------------------------------------------------

import collections
import csv
import json
import logging
import math
import sys
from   pathlib import Path

import numpy as np

from   .averaging import FilterSpec
from   .config import build_model, ladder_momenta
from   .exc import ConfigError, ToleranceBreach
from   .lib import log
from   .lib.py import format_number, if_none
from   .pulse import GaussianAmplitude, PulseSpec, delta_pulse_U, exact_pulse_U
from   .pulse import reduce_model, two_photon_couplings
from   .scenarios import AtomicInput, OpticalInput, build_state, run_hom
from   .scenarios import run_oracle, run_single_particle, sweep
from   .spaces import PlaneWave, StateVector

LOG = logging.getLogger(__name__)

ORACLE_TOLERANCE = 2e-3
NORM_SAMPLES = 8

FORMATS = ("csv", "jsonl")

#-------------------------------------------------------------------------------
# Inputs

def _on_backend(config, atom):
    """
    Rekeys a one-atom input by mode index for the grid backend.
    """
    if config["basis"]["backend"] == "ladder":
        return atom
    kappas = ladder_momenta(config)

    def index(level, kappa):
        matches = np.flatnonzero(np.abs(np.asarray(kappas[level]) - kappa) < 1e-9)
        if len(matches) == 0:
            raise ConfigError(f"momentum {kappa} not in the basis", field="scenario.atom.kappa")
        return level, int(matches[0])

    return AtomicInput(
        { index(*key): w for key, w in atom.amplitudes.items() },
        truncation_error=atom.truncation_error)


def build_atoms(config):
    """
    The `AtomicInput` of the configured scenario.
    """
    K = config.recoil
    basis = config["basis"]
    inputs = []
    for atom in config.atoms():
        if atom["sigma"] is None:
            one = AtomicInput.single(atom["level"], atom["kappa"])
        else:
            amp = GaussianAmplitude(atom["sigma"], atom["kappa"], basis["dimension"])
            one = AtomicInput.gaussian(
                atom["level"], amp, K, span=basis["momentum_span"])
        inputs.append(_on_backend(config, one))
    return inputs[0] if len(inputs) == 1 else AtomicInput.pair(*inputs)


def build_light(config):
    """
    The `OpticalInput` of the configured scenario.
    """
    coherent = config["scenario"]["light"]["coherent"]
    if coherent is not None:
        return OpticalInput.coherent(*coherent, config["basis"]["n_max"])
    return OpticalInput.fock(*config.fock)


def rabi_frequency(model, fock):
    """
    The Rabi frequency Ω_n = |Ω|√(n_a(n_b + 1)) of a Fock pair; |Ω| for
    coherent light.
    """
    omega, _ = two_photon_couplings(model)
    if not isinstance(omega, PlaneWave):
        raise ConfigError("Rabi angles need plane-wave couplings", field="pulse.angle")
    if fock is None:
        return omega.magnitude
    n_a, n_b = fock
    return omega.magnitude * math.sqrt(n_a * (n_b + 1))


def build_pulse(config, model):
    """
    The `PulseSpec` of a config, resolving a Rabi angle against the model.
    """
    pulse = config["pulse"]
    if pulse["area"] is not None:
        return PulseSpec(pulse["area"], pulse["strength"], pulse["instant"])
    if pulse["theta"] is not None:
        theta = pulse["theta"]
    else:
        frequency = rabi_frequency(model, config.fock)
        if frequency == 0:
            raise ConfigError("Rabi frequency vanishes for this input", field="pulse.angle")
        theta = pulse["angle"] / frequency
    return PulseSpec.from_theta(theta, pulse["strength"], pulse["instant"])


#-------------------------------------------------------------------------------
# Runs

class RunReport(collections.namedtuple(
        "RunReport", ("config", "rows", "provenance", "oracle", "wall_time"))):
    """
    The outcome of a run.

    @ivar config
      The validated config, as JSON-ready data.
    @ivar rows
      List of result rows, each a mapping from column name to value.
    @ivar provenance
      Mapping describing the approximations made: dropped 𝒱̂² products and
      truncation errors.
    @ivar oracle
      List of `OracleDelta`, or `None` if the oracle wasn't run.
    @ivar wall_time
      Seconds spent; not written to data files.
    """

    def __repr__(self):
        return f"RunReport(<{len(self.rows)} rows>, wall_time={self.wall_time:.3f})"


    @property
    def columns(self):
        return list(self.rows[0]) if self.rows else []



class OracleDelta(collections.namedtuple("OracleDelta", ("name", "value", "tolerance"))):
    """
    One comparison against an exact computation; `tolerance` is `None` when
    the comparison isn't checked.
    """



def sweep_grid(start, step, stop):
    """
    Grid values from `start` to `stop` inclusive.

      >>> len(sweep_grid(0, 0.1, 3.2))
      33

    """
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [ round(start + i * step, 12) for i in range(count) ]


def _at(config, parameter, value):
    """
    Returns the config for one sweep point.
    """
    if parameter in ("theta", "angle"):
        return config.with_values({
            "pulse.theta": None, "pulse.angle": None, "pulse.area": None,
            f"pulse.{parameter}": value,
        })
    elif parameter == "detuning":
        frequency = config["light"]["b"]["frequency"]
        return config.with_values({"light.b.frequency": frequency + value})
    else:
        fock = list(config.fock)
        fock["ab".index(parameter[-1])] = int(round(value))
        return config.with_values({"scenario.light.fock": fock})


def _execute(config, model):
    atoms = build_atoms(config)
    light = build_light(config)
    pulse = build_pulse(config, model)
    if config.scenario == "single":
        return run_single_particle(
            model, atoms, light, pulse, method=config["pulse"]["method"])
    else:
        return run_hom(
            model, atoms, light, pulse,
            optical_limit=config["scenario"]["optical_limit"])


def _row(config, parameter, value, result):
    row = collections.OrderedDict()
    row["scenario"] = config.scenario
    row["parameter"] = parameter
    row["value"] = value
    summary = result.summary()
    row["theta"] = summary.pop("theta")
    row.update(summary)
    row["truncation"] = result.truncation

    if config.scenario == "single":
        # Closed-form transfer for a plane-wave atom starting in a.
        atom, = config.atoms()
        closed = None
        if config.fock is not None and atom["level"] == "a" and atom["sigma"] is None:
            frequency = rabi_frequency(result.model, config.fock)
            closed = math.sin(row["theta"] * frequency) ** 2
        row["closed_form"] = closed
    row["oracle_delta"] = None
    return row


def provenance(config, model):
    """
    The approximations a run makes.
    """
    dropped = reduce_model(model).V2_approx().dropped
    return {
        "units": dict(config["units"]),
        "approximations": dict(config["approximations"]),
        "basis_dim": model.basis.dim,
        "dropped_products": [ {"name": d.name, "norm": d.norm} for d in dropped ],
        "atom_truncation": build_atoms(config).truncation_error,
        "light_truncation": build_light(config).truncation_loss,
    }


def run(config, *, oracle=False, threads=None):
    """
    Runs the configured scenario, over the sweep grid if there is one.

    @param oracle
      If true, also runs `compare_oracle` and fills the oracle column.
    @param threads
      Sweep parallelism; by default from `SIM_THREADS`.
    @rtype
      `RunReport`.
    """
    with log.timed(LOG, f"{config.scenario} run") as timing:
        model = build_model(config)
        spec = config["sweep"]
        if spec is None:
            rows = [ _row(config, "", None, _execute(config, model)) ]
        else:
            parameter = spec["parameter"]
            grid = sweep_grid(spec["start"], spec["step"], spec["stop"])
            if parameter in ("n_a", "n_b"):
                grid = [ int(round(v)) for v in grid ]

            def point(value):
                point_config = _at(config, parameter, value)
                point_model = build_model(point_config) if parameter == "detuning" else model
                return _execute(point_config, point_model)

            rows = [
                _row(_at(config, parameter, r.value), parameter, r.value, r.result)
                for r in sweep(parameter, grid, point, threads=threads) ]

        deltas = compare_oracle(config, model) if oracle else None
        if deltas is not None:
            for row in rows:
                row["oracle_delta"] = deltas[0].value
        prov = provenance(config, model)

    return RunReport(config.echo(), rows, prov, deltas, timing["elapsed"])


def compare_oracle(config, model=None):
    """
    Compares the approximate dynamics with exact computations.

    Two deltas: `oracle_delta`, the largest population difference between
    exp(−iH_eff t) and the low-pass filtered exact evolution over the oracle
    window; and `pulse_delta`, the largest population difference between
    the delta pulse and exp(−iϑH_R).

    @return
      List of `OracleDelta`.
    """
    model = build_model(config) if model is None else model
    atoms = build_atoms(config)
    light = build_light(config)
    checks = config["check"]

    oracle = config["oracle"]
    result = run_oracle(
        model, atoms, light, filter=FilterSpec(**config["filter"]),
        dt=oracle["dt"], duration=oracle["duration"])

    pulse = build_pulse(config, model)
    reduced = reduce_model(model)
    psi = build_state(model, atoms, light)
    p_delta = delta_pulse_U(pulse, reduced).apply(psi).probabilities()
    p_exact = exact_pulse_U(pulse, reduced).apply(psi).probabilities()

    return [
        OracleDelta(
            "oracle_delta", result.max_delta,
            checks.get("oracle_delta", ORACLE_TOLERANCE)),
        OracleDelta(
            "pulse_delta", float(np.max(np.abs(p_delta - p_exact))),
            checks.get("pulse_delta")),
    ]


#-------------------------------------------------------------------------------
# Checks

def random_norm_defect(config, samples=NORM_SAMPLES):
    """
    The largest norm change of the pulse on random states drawn with the
    config's seed.
    """
    model = build_model(config)
    U = delta_pulse_U(build_pulse(config, model), reduce_model(model))
    rng = np.random.default_rng(config["seed"])
    dim = model.basis.dim
    defect = 0.0
    for _ in range(samples):
        amplitudes = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi = StateVector(amplitudes / np.linalg.norm(amplitudes), model.basis)
        defect = max(defect, abs(U.apply(psi).norm - 1))
    return defect


def _rows_max(report, fn):
    values = [ v for v in map(fn, report.rows) if v is not None ]
    return max(values) if values else None


def metric(report, config, name):
    """
    The value of a checked metric: the worst case over rows.
    """
    if name == "coincidence":
        value = _rows_max(report, lambda r: r["coincidence"])
    elif name == "norm_defect":
        value = _rows_max(report, lambda r: abs(r["norm"] - 1))
    elif name in ("unitarity_defect", "truncation"):
        value = _rows_max(report, lambda r: r[name])
    elif name == "rabi_error":
        value = _rows_max(
            report,
            lambda r: None if r.get("closed_form") is None
            else abs(r["P_b"] - r["closed_form"]))
    elif name == "random_norm_defect":
        value = random_norm_defect(config)
    else:
        deltas = report.oracle if report.oracle is not None else compare_oracle(config)
        value, = ( d.value for d in deltas if d.name == name )
    if value is None:
        raise ConfigError("metric not available for this run", field=f"check.{name}")
    return value


def check(report, config):
    """
    Compares each metric in the config's `check` section with its tolerance.

    @return
      Mapping from metric name to value.
    @raise ToleranceBreach
      A metric exceeds its tolerance.
    """
    values = {}
    for name, tolerance in sorted(config["check"].items()):
        value = values[name] = metric(report, config, name)
        if value > tolerance:
            raise ToleranceBreach(name, value, tolerance)
        LOG.info(f"check {name} = {value:.3e} ≤ {tolerance:.3e}")
    return values


#-------------------------------------------------------------------------------
# Output

def format_value(value):
    return "" if value is None else format_number(value)


def write_csv(rows, file):
    if not rows:
        return
    writer = csv.writer(file, lineterminator="\n")
    columns = list(rows[0])
    writer.writerow(columns)
    for row in rows:
        writer.writerow([ format_value(row[c]) for c in columns ])


def write_jsonl(rows, file):
    for row in rows:
        file.write(json.dumps(row) + "\n")


def _metadata(report):
    return {
        "config": report.config,
        "provenance": report.provenance,
        "oracle": None if report.oracle is None else [
            dict(d._asdict()) for d in report.oracle ],
    }


def emit(report, format="csv", out=None, *, name=None):
    """
    Writes a run's table and metadata.

    @param out
      Output directory, created if missing.  If `None`, the table is written
      to stdout and the metadata is omitted.
    @param name
      File stem; by default the scenario name.
    @return
      The paths written.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format: {format}")
    write = write_csv if format == "csv" else write_jsonl
    if out is None:
        write(report.rows, sys.stdout)
        return []

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    name = if_none(name, report.config["scenario"]["name"])
    table = out / f"{name}.{format}"
    with open(table, "w", newline="") as file:
        write(report.rows, file)
    meta = out / f"{name}.json"
    with open(meta, "w") as file:
        json.dump(_metadata(report), file, indent=1, sort_keys=True)
        file.write("\n")
    LOG.info(f"wrote {table} and {meta}")
    return [table, meta]


