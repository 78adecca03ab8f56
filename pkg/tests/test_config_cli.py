import json
import math
import os

import pytest

from ioncrystal.cli import main
from ioncrystal.config import load_config, parse_config
from ioncrystal.constants import AMU, TWO_PI
from ioncrystal.errors import ConfigParseError, ValidationError
from ioncrystal.io import read_csv

EQ = """
[trap]
alpha = 2.0
[experiment]
n_ions = 7
[run]
seed = 3
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_units_are_converted_to_si():
    cfg = parse_config("""
[trap]
rf_voltage_v = 300
radial_extent_um = 500
drive_frequency_mhz = 20
[species]
mass_amu = 40
[experiment]
mode = conversion
ndot_per_s = 90
mode_frequency_khz = 1000
theta_deg = 90
""", "thermometry")
    assert cfg.trap.rf_voltage == 300
    assert cfg.trap.radial_extent == pytest.approx(500e-6)
    assert cfg.trap.drive_frequency == pytest.approx(TWO_PI * 20e6)
    assert cfg.species.mass == pytest.approx(40 * AMU)
    assert cfg.get("mode_frequency") == pytest.approx(TWO_PI * 1e6)
    assert cfg.get("ndot") == 90
    assert cfg.get("theta") == pytest.approx(math.pi / 2)


def test_list_values_and_defaults():
    cfg = parse_config("[experiment]\nn_ions = 3\nheat_times_ms = 0, 1, 2.5\n", "md")
    assert cfg.get("heat_times") == pytest.approx((0.0, 1e-3, 2.5e-3))
    assert cfg.seed == 0 and cfg.output_format == "both" and cfg.alpha is None


@pytest.mark.parametrize("text,error", [
    ("[experiment]\nn_ions = 3\nbogus = 1\n", ConfigParseError),
    ("[experiments]\nn_ions = 3\n", ConfigParseError),
    ("[experiment]\nn_ions = three\n", ConfigParseError),
    ("not a section line\n", ConfigParseError),
    ("[experiment]\n", ValidationError),
    ("[trap]\nalpha = 2\n", ValidationError),
    ("[trap]\nalpha = -1\n[experiment]\nn_ions = 3\n", ValidationError),
    ("[trap]\nrf_voltage_v = -5\n[experiment]\nn_ions = 3\n", ValidationError),
    ("[experiment]\nn_ions = 0\n", ValidationError),
    ("[experiment]\nn_ions = 3\n[output]\nformat = xml\n", ValidationError),
])
def test_bad_configs(text, error):
    with pytest.raises(error):
        parse_config(text, "equilibrium")


def test_unreadable_file():
    with pytest.raises(ConfigParseError):
        load_config("/nonexistent/run.ini", "modes")


def test_resolved_config_is_json(tmp_path):
    cfg = load_config(_write(tmp_path, EQ), "equilibrium")
    text = json.dumps(cfg.resolved())
    assert '"alpha": 2.0' in text and '"seed": 3' in text


def test_equilibrium_outputs_and_sidecars(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["equilibrium", "--config", _write(tmp_path, EQ), "--out", str(out)]) == 0
    rows = read_csv(out / "equilibrium.csv")
    assert len(rows) == 7
    side = json.loads((out / "equilibrium.csv.config.json").read_text())
    assert side["seed"] == 3
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["subcommand"] == "equilibrium"


def test_byte_identical_reruns(tmp_path):
    cfg = _write(tmp_path, EQ)
    main(["equilibrium", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["equilibrium", "--config", cfg, "--out", str(tmp_path / "b")])
    for name in sorted(os.listdir(tmp_path / "a")):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_modes_subcommand(tmp_path):
    out = tmp_path / "m"
    assert main(["modes", "--config", _write(tmp_path, EQ.replace("[run]\nseed = 3", "")),
                 "--out", str(out), "--format", "json"]) == 0
    data = json.loads((out / "modes.json").read_text())
    assert data
    assert not (out / "modes.csv").exists()


def test_conversion_subcommand(tmp_path):
    text = "[experiment]\nmode = conversion\nndot_per_s = 90\nmode_frequency_khz = 1000\n"
    out = tmp_path / "c"
    assert main(["thermometry", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    assert any(name.endswith(".json") for name in os.listdir(out))


@pytest.mark.parametrize("argv_extra,text,code", [
    ([], "[experiment]\n", 4),
    ([], "[experiment]\nn_ions = 3\nwhat = 1\n", 3),
    (["--seed", "-1"], EQ, 4),
    (["--threads", "0"], EQ, 4),
])
def test_exit_codes_and_error_report(tmp_path, capsys, argv_extra, text, code):
    out = tmp_path / "err"
    rc = main(["equilibrium", "--config", _write(tmp_path, text), "--out", str(out)] + argv_extra)
    assert rc == code
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["exit_code"] == code
    assert json.loads((out / "error.json").read_text())["exit_code"] == code


def test_usage_error():
    assert main(["no-such-command"]) == 2
    assert main(["--help"]) == 0


def test_numerical_failure_exit_code(tmp_path):
    # dc voltage far beyond the radial stability limit
    text = "[trap]\ndc_voltage_v = 5000\n[experiment]\nn_ions = 2\n"
    assert main(["equilibrium", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 5


def test_validate_subset_passes(tmp_path):
    text = "[experiment]\ncriteria = 1, 2, 3\n"
    out = tmp_path / "v"
    assert main(["validate", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rows = read_csv(out / "validate.csv")
    assert [r["status"] for r in rows] == ["PASS"] * 3


def test_validate_reports_failure(tmp_path):
    out = tmp_path / "v4"
    assert main(["validate", "--config", _write(tmp_path, "[experiment]\ncriteria = 4\n"), "--out", str(out)]) == 6
