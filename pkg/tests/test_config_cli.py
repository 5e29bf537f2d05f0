import csv

import numpy as np
import pytest

from osclab.cli import main
from osclab.config import SCHEMA, ConfigError, default_config, parse_config


def test_minimal_config_takes_defaults():
    c = parse_config("scenario = flat_sine\n")
    assert c["scenario"] == "flat_sine"
    assert c["ladder.levels"] == 7 and c["solver.tol"] == 1e-10
    assert c["nonlinearity.f"] == "one" and c["nonlinearity.g"] == "linear"
    n_keys = sum(len(k) for k in SCHEMA.values())
    assert len(c.defaulted) == n_keys - 1
    sc = c.scenario()
    assert np.allclose(sc.ladder, 0.2 * 0.5 ** np.arange(7))


def test_sections_comments_and_overrides():
    c = parse_config("# run\nscenario = annulus_sine ; inline\n\n[ladder]\nlevels = 3\n[profile]\nalpha = 0.5\n")
    assert c["ladder.levels"] == 3
    assert "ladder.levels" not in c.defaulted
    assert c.scenario().profile.alpha == 0.5


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario = flat_sine\n[profile]\nalpha = 0\n", 3, "out of range"),
    ("scenario = flat_sine\n[profile]\nalpha = 1.5\n", 3, "out of range"),
    ("scenario = flat_sine\ncolour = red\n", 2, "unknown key 'colour'"),
    ("scenario = flat_sine\n[ladder]\nlevels = many\n", 3, "malformed int"),
    ("scenario = flat_sine\n[solver]\ntol = 1e-x\n", 3, "malformed float"),
    ("scenario = flat_sine\n[extras]\n", 2, "unknown section"),
    ("scenario = nowhere\n", 1, "not one of"),
    ("scenario flat_sine\n", 1, "expected 'key = value'"),
    ("[ladder]\nlevels = 3\n", 3, "missing required key 'scenario'"),
])
def test_invalid_documents(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"line {line}: ")


def test_duplicate_names_both_lines():
    with pytest.raises(ConfigError, match=r"line 3: duplicate key 'seed' \(first set on line 1\)"):
        parse_config("seed = 1\nscenario = flat_sine\nseed = 2\n")


def test_serialize_round_trip():
    c = parse_config("scenario = flat_sawtooth\n[solver]\ntol = 3e-11\n[profile]\nphi1 = 0.25\n")
    again = parse_config(c.serialize())
    assert again.values == c.values
    assert again.serialize() == c.serialize()
    assert again.digest() == c.digest()
    assert again.defaulted == ()


def test_digest_ignores_output_directory():
    a = parse_config("scenario = flat_sine\nout = a\n")
    b = parse_config("scenario = flat_sine\nout = b\n")
    assert a.digest() == b.digest()
    assert a.digest() != parse_config("scenario = flat_sine\nseed = 1\n").digest()


def _read(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_cli_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--scenario", "flat_sine", "--study", "everything"])
    assert info.value.code == 2
    assert main(["run"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario = flat_sine\nbogus = 1\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["defaults", "nowhere"]) == 2


def test_cli_defaults_round_trip(capsys):
    assert main(["defaults", "flat_sine"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text).values == default_config("flat_sine").values


def test_cli_coefficients_sawtooth(tmp_path):
    cfg = tmp_path / "saw.cfg"
    cfg.write_text("scenario = flat_sawtooth\nseed = 4\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--study", "coefficients", "--out", str(out)]) == 0
    header, rows = _read(out / "coefficients.csv")
    assert header.startswith("# config=")
    assert "scenario=flat_sawtooth" in header and "seed=4" in header and "ladder=[0.2 0.1" in header
    assert len(rows) == 32
    gamma_cols = [k for k in rows[0] if k.startswith("gamma_closed")]
    assert gamma_cols and all(float(r[gamma_cols[0]]) == pytest.approx(np.sqrt(2), rel=1e-12) for r in rows)
    assert all(k.endswith("]") for k in rows[0])
    assert rows[0]["pass [bool]"] == "1"
    dat = (out / "coefficients.dat").read_text().splitlines()
    assert dat[0] == header and dat[1].startswith("# x ")
    summary = (out / "summary.txt").read_text()
    assert "coefficients: PASS" in summary and "defaulted:" in summary


def test_parallel_and_serial_reports_identical(tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text("scenario = flat_sawtooth\n[ladder]\nlevels = 3\n")
    outs = [tmp_path / "serial", tmp_path / "parallel"]
    main(["run", "--config", str(cfg), "--study", "trace", "--out", str(outs[0])])
    main(["run", "--config", str(cfg), "--study", "trace", "--out", str(outs[1]), "--parallel"])
    assert (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()
