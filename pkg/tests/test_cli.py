import csv
import json
import re

import pytest

from stokesgreen.cli import (CATALOG, CSV_COLUMNS, ConfigError, bundled_configs, list_checks,
                             load_config, main)

SMALL = """
[domain]
n = {n}
[coefficients]
variant = identity
[checks]
enabled = {enabled}
{extra}
[run]
seed = 3
"""


def _write(tmp_path, enabled="ellipticity, bogovskii", extra="", n=16, **sections):
    path = tmp_path / "cfg.ini"
    text = SMALL.format(enabled=enabled, extra=extra, n=n)
    for sec, body in sections.items():
        text += f"[{sec}]\n{body}\n"
    path.write_text(text)
    return path


def test_list_checks_is_stable(capsys):
    assert main(["list-checks"]) == 0
    first = capsys.readouterr().out
    assert main(["list-checks"]) == 0
    assert capsys.readouterr().out == first
    entries = {e["name"]: e for e in json.loads(first)}
    assert set(entries) == set(CATALOG)
    assert "decay" in entries
    assert len(entries["corollary-bounds"]["sub_checks"]) == 5
    assert list_checks() == json.loads(first)


def test_bundled_configs_validate():
    assert {"oseen-smoke", "layered-halfspace"} <= set(bundled_configs())
    for name in bundled_configs():
        cfg = load_config(name)
        assert cfg.enabled


def test_pole_outside_window_names_the_field(tmp_path, capsys):
    path = _write(tmp_path, enabled="decay", green="poles = 0.05, 0.5, 0.5")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert str(info.value).startswith("green.poles[0]")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "green.poles[0]" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("extra,field", [
    ("kind = moon", "domain.kind"),
    ("", "checks.enabled[0]"),
])
def test_invalid_fields_are_named(tmp_path, extra, field):
    if field == "domain.kind":
        path = tmp_path / "c.ini"
        path.write_text(f"[domain]\n{extra}\n")
    else:
        path = _write(tmp_path, enabled="nonsense")
    with pytest.raises(ConfigError, match="^" + re.escape(field)):
        load_config(path)


def test_eps_below_h_rejected(tmp_path):
    path = _write(tmp_path, green="eps = 0.5h")
    with pytest.raises(ConfigError, match="^green.eps"):
        load_config(path)


def test_run_writes_artifacts(tmp_path):
    path = _write(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out), "--seed", "5"]) == 0
    lines = (out / "checks.csv").read_text().splitlines()
    assert lines[0].startswith("# generated")
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == CSV_COLUMNS
    assert {r[0] for r in rows[1:]} == {"ellipticity", "bogovskii"}
    assert all(r[-1] == "true" for r in rows[1:])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["config"]["run"]["seed"] == "5"
    assert "seconds" in summary["checks"]["bogovskii"]
    assert "[domain]" in (out / "config.resolved.ini").read_text()


def test_failing_mandatory_check_exits_nonzero(tmp_path):
    path = _write(tmp_path, enabled="oseen", extra="oseen.band = 1e-9", n=24)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 1
    rows = list(csv.reader((out / "checks.csv").read_text().splitlines()[2:]))
    assert rows[0][:2] == ["oseen", "sup_rel_error"] and rows[0][-1] == "false"


def test_rerun_is_byte_identical(tmp_path):
    path = _write(tmp_path)
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        main(["run", str(path), "--out", str(out)])
        texts.append((out / "checks.csv").read_text().split("\n", 1)[1])
    assert texts[0] == texts[1]
