import csv
import functools
import json
import math
from   pathlib import Path

import pytest

from   multilambda.config import build_model, load_config
from   multilambda.exc import ConfigError, ToleranceBreach
from   multilambda.report import build_atoms, build_light, build_pulse, check
from   multilambda.report import compare_oracle, emit, random_norm_defect, run
from   multilambda.report import sweep_grid

#-------------------------------------------------------------------------------

CONFIGS = Path(__file__).parents[2] / "configs"

OMEGA = 0.002

def configured(name, **updates):
    config = load_config(CONFIGS / f"{name}.yaml")
    return config.with_values(updates) if updates else config


@functools.lru_cache(maxsize=None)
def hom_report():
    return run(configured("hom"), threads=1)


@functools.lru_cache(maxsize=None)
def raman_report():
    return run(configured("raman"), threads=4)


#-------------------------------------------------------------------------------

def test_sweep_grid():
    assert len(sweep_grid(0, 0.1, 3.2)) == 33
    assert sweep_grid(0, 0.1, 3.2)[3] == 0.3
    assert sweep_grid(0, 0.5, 1) == [0.0, 0.5, 1.0]
    assert sweep_grid(0, 0.3, 1) == [0.0, 0.3, 0.6, 0.9]
    assert sweep_grid(1, 1, 1) == [1.0]


def test_inputs():
    config = configured("hom")
    atoms = build_atoms(config)
    assert atoms.particles == 2
    assert set(atoms.amplitudes) == {(("a", 0.0), ("b", 2.0)), (("b", 2.0), ("a", 0.0))}
    assert build_light(config).table == {(1, 1): 1}

    config = configured("raman", **{"scenario.atom": {"level": "a", "sigma": 1.0}})
    atoms = build_atoms(config)
    assert atoms.particles == 1
    assert len(atoms.amplitudes) == 9
    assert atoms.truncation_error < 1e-12


def test_build_pulse():
    config = configured("hom")
    model = build_model(config)
    pulse = build_pulse(config, model)
    assert pulse.theta * OMEGA * math.sqrt(2) == pytest.approx(math.pi / 4, rel=1e-12)

    config = config.with_values({
        "pulse.angle": None, "pulse.area": 3.0, "pulse.strength": 2.0, "pulse.instant": 0.5})
    assert build_pulse(config, model).theta == 1.5
    assert build_pulse(config, model).instant == 0.5

    config = config.with_values({
        "pulse.area": None, "pulse.angle": 1.0, "scenario.light.fock": [0, 1]})
    with pytest.raises(ConfigError) as exc_info:
        build_pulse(config, model)
    assert exc_info.value.field == "pulse.angle"


#-------------------------------------------------------------------------------
# Runs

def test_hom_dip():
    row, = hom_report().rows
    assert row["scenario"] == "hom"
    assert row["coincidence"] <= 1e-10
    assert row["P_aa"] == pytest.approx(0.5, abs=1e-10)
    assert row["P_bb"] == pytest.approx(0.5, abs=1e-10)
    assert row["oracle_delta"] is None
    assert "closed_form" not in row
    values = check(hom_report(), configured("hom"))
    assert set(values) == {"coincidence", "norm_defect"}


def test_hom_third():
    config = configured("hom", **{"pulse.angle": math.pi / 3})
    report = run(config, threads=1)
    row, = report.rows
    assert row["coincidence"] == pytest.approx(0.25, abs=1e-10)
    with pytest.raises(ToleranceBreach) as exc_info:
        check(report, config)
    assert exc_info.value.name == "coincidence"
    assert exc_info.value.tolerance == 1e-10


def test_provenance():
    provenance = hom_report().provenance
    assert len(provenance["dropped_products"]) == 10
    # Without counter-rotating couplings nothing is lost.
    assert all( d["norm"] == 0 for d in provenance["dropped_products"] )
    assert provenance["approximations"]["rwa"]
    assert provenance["units"] == {"frequency": "scaled", "reference": 1.0}
    assert provenance["light_truncation"] == 0
    assert hom_report().config["scenario"]["name"] == "hom"
    assert hom_report().wall_time >= 0


def test_raman_sweep():
    rows = raman_report().rows
    assert len(rows) == 64
    assert [ r["value"] for r in rows[: 3] ] == [0.0, 0.05, 0.1]
    for row in rows:
        assert row["parameter"] == "angle"
        assert row["P_b"] == pytest.approx(math.sin(row["value"]) ** 2, abs=1e-10)
        assert abs(row["P_b"] - row["closed_form"]) <= 1e-10
        assert row["theta"] * OMEGA == pytest.approx(row["value"], rel=1e-12, abs=1e-15)
    values = check(raman_report(), configured("raman"))
    assert values["rabi_error"] <= 1e-10


def test_theta_sweep():
    config = configured(
        "raman", sweep={"parameter": "theta", "start": 0, "step": 0.1, "stop": 3.2})
    rows = run(config, threads=2).rows
    assert len(rows) == 33
    assert all( r["theta"] == r["value"] for r in rows )


def test_photon_sweep():
    config = configured(
        "raman", sweep={"parameter": "n_b", "start": 0, "step": 1, "stop": 3})
    rows = run(config, threads=2).rows
    assert [ r["value"] for r in rows ] == [0, 1, 2, 3]
    # The angle is resolved per point, so every point is a 50:50 split.
    for row in rows:
        assert row["P_b"] == pytest.approx(0.5, abs=1e-10)
    thetas = [ r["theta"] for r in rows ]
    assert thetas == sorted(thetas, reverse=True)


def test_detuning_sweep():
    config = configured(
        "raman", sweep={"parameter": "detuning", "start": 0, "step": 0.001, "stop": 0.002})
    rows = run(config, threads=1).rows
    assert [ r["value"] for r in rows ] == [0.0, 0.001, 0.002]
    for row in rows:
        assert row["norm"] == pytest.approx(1, abs=1e-10)


def test_random_norm_defect():
    config = configured("raman")
    assert random_norm_defect(config) <= 1e-10
    assert random_norm_defect(config) == random_norm_defect(config)


def test_metric_unavailable():
    config = configured("hom", check={"rabi_error": 1e-10})
    with pytest.raises(ConfigError) as exc_info:
        check(hom_report(), config)
    assert exc_info.value.field == "check.rabi_error"


def test_compare_oracle():
    deltas = compare_oracle(configured("oracle"))
    oracle, pulse = deltas
    assert oracle.name == "oracle_delta"
    assert oracle.value <= oracle.tolerance == 2e-3
    assert pulse.name == "pulse_delta"
    assert pulse.tolerance is None
    assert 0 <= pulse.value <= 1


#-------------------------------------------------------------------------------
# Output

def test_emit_csv(tmp_path):
    paths = emit(hom_report(), "csv", tmp_path)
    assert [ p.name for p in paths ] == ["hom.csv", "hom.json"]
    with open(paths[0]) as file:
        rows = list(csv.DictReader(file))
    assert len(rows) == 1
    assert rows[0]["scenario"] == "hom"
    assert rows[0]["oracle_delta"] == ""
    assert float(rows[0]["P_aa"]) == hom_report().rows[0]["P_aa"]

    meta = json.loads(paths[1].read_text())
    assert set(meta) == {"config", "provenance", "oracle"}
    assert "wall_time" not in paths[1].read_text()


def test_emit_deterministic(tmp_path):
    first = emit(run(configured("hom"), threads=1), "csv", tmp_path / "first")
    second = emit(run(configured("hom"), threads=1), "csv", tmp_path / "second")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_emit_jsonl(tmp_path):
    table, _ = emit(raman_report(), "jsonl", tmp_path, name="rabi")
    assert table.name == "rabi.jsonl"
    lines = table.read_text().splitlines()
    assert len(lines) == 64
    records = [ json.loads(l) for l in lines ]
    assert records[0] == raman_report().rows[0]


def test_emit_stdout(capsys):
    assert emit(hom_report(), "csv") == []
    header, row = capsys.readouterr().out.splitlines()
    assert header.split(",")[: 4] == ["scenario", "parameter", "value", "theta"]
    assert row.startswith("hom,,,")


