"""Desk-scale acceptance suite (d = 3), one test per criterion.

Every criterion runs through the experiment runner with a small INI config,
so config validation, the solvers and the CSV writer are exercised end to
end. A PASS/FAIL line per criterion is printed in the terminal summary.
Expect about twenty minutes on a single core.
"""

import csv
import time

import numpy as np
import pytest

from stokesgreen import make_coefficients
from stokesgreen.cli import load_config, run_experiment

THREE_POLES = "0.5, 0.5, 0.5; 0.45, 0.5, 0.55; 0.55, 0.45, 0.5"
pytestmark = pytest.mark.slow

LAYERED = "variant = layered\nvalues = 0.5, 2.0\nperiod = 0.1\nlam = 0.25"


def _run(tmp, name, domain, coefficients, green, checks, seed=0):
    path = tmp / f"{name}.ini"
    path.write_text(f"[domain]\n{domain}\n[coefficients]\n{coefficients}\n"
                    f"[green]\n{green}\n[checks]\n{checks}\n[run]\nseed = {seed}\n")
    t0 = time.perf_counter()
    status, summary = run_experiment(load_config(path), tmp / name)
    seconds = time.perf_counter() - t0
    return status, _rows(tmp / name), summary, seconds


def _rows(out):
    lines = (out / "checks.csv").read_text().splitlines()[1:]
    reader = csv.DictReader(lines)
    return {(r["check"], r["sub_check"]): r for r in reader}


def _measured(rows, check, sub):
    return float(rows[(check, sub)]["measured"])


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def bundled_runs(workdir):
    """Both bundled configs, each run twice."""
    out = {}
    for name in ("oseen-smoke", "layered-halfspace"):
        runs = []
        for k in range(2):
            t0 = time.perf_counter()
            status, _ = run_experiment(load_config(name), workdir / f"{name}-{k}")
            runs.append((status, workdir / f"{name}-{k}", time.perf_counter() - t0))
        out[name] = runs
    return out


# ---------------------------------------------------------------- criteria


@pytest.mark.criterion("C1", "Oseen oracle, n=48, eps=2h")
def test_c1_oseen_oracle(workdir, record_property):
    status, rows, _, sec = _run(workdir, "c1", "n = 48\npad_layers = 6\npad_ratio = 2.0",
                                "variant = identity", "poles = 0.5, 0.5, 0.5\neps = 2h",
                                "enabled = oseen")
    err = _measured(rows, "oseen", "sup_rel_error")
    record_property("sup_rel_error", f"{err:.4f}")
    record_property("seconds", f"{sec:.0f}")
    assert status == 0 and err <= 0.10
    assert sec <= 300


@pytest.mark.criterion("C2", "decay slope -1 +- 0.25, identity and layered")
def test_c2_decay_exponent(workdir, record_property):
    total = 0.0
    for label, coeffs in (("identity", "variant = identity"), ("layered", LAYERED)):
        status, rows, _, sec = _run(workdir, f"c2-{label}", "n = 32\npad_layers = 6",
                                    coeffs, f"poles = {THREE_POLES}\neps = 2h",
                                    "enabled = decay")
        total += sec
        slopes = [float(r["measured"]) for (c, _), r in rows.items() if c == "decay"]
        record_property(label, ", ".join(f"{s:.3f}" for s in slopes))
        assert status == 0 and len(slopes) == 3
        assert all(abs(s + 1) <= 0.25 for s in slopes)
    record_property("seconds", f"{total:.0f}")
    assert total <= 600


@pytest.mark.criterion("C3", "corollary slopes, layered, q=1")
def test_c3_corollary_bounds(workdir, record_property):
    status, rows, _, sec = _run(workdir, "c3", "n = 48\npad_layers = 6", LAYERED,
                                "poles = 0.5, 0.5, 0.5\neps = 1h",
                                "enabled = corollary-bounds\ncorollary.q = 1.0")
    subs = {s: r for (c, s), r in rows.items() if c == "corollary-bounds"}
    record_property("slopes", ", ".join(f"{s}={float(r['measured']):.3f}"
                                        for s, r in subs.items()))
    record_property("seconds", f"{sec:.0f}")
    assert len(subs) == 5
    for r in subs.values():
        assert abs(float(r["measured"]) - float(r["target"])) <= 0.3
    assert status == 0 and sec <= 900


@pytest.mark.criterion("C4", "symmetry with nonsymmetric diffeo coefficients")
def test_c4_symmetry(workdir, record_property):
    status, rows, summary, _ = _run(workdir, "c4", "n = 32", "variant = diffeo",
                                    "poles = 0.5, 0.5, 0.5; 0.45, 0.5, 0.55\neps = 2h",
                                    "enabled = symmetry")
    disc = _measured(rows, "symmetry", "max_rel_discrepancy")
    record_property("max_rel_discrepancy", f"{disc:.3g}")
    pts = np.random.default_rng(0).uniform(0, 1, size=(50, 3))
    assert not make_coefficients(summary["coefficients"]["variant"], 3).is_symmetric(pts)
    assert status == 0 and disc <= 10 * 1e-8


@pytest.mark.criterion("C5", "representation formula, 10 random data sets")
def test_c5_representation(workdir, record_property):
    status, rows, _, sec = _run(workdir, "c5", "n = 32", "variant = diffeo",
                                "poles = 0.45, 0.55, 0.5\neps = 2h",
                                "enabled = representation\nrepresentation.trials = 10")
    err = _measured(rows, "representation", "max_rel_error")
    record_property("max_rel_error", f"{err:.3g}")
    record_property("seconds", f"{sec:.0f}")
    assert status == 0 and err <= 1e-6
    assert sec <= 300


@pytest.mark.criterion("C6", "eps-scaling slope -0.5 +- 0.15")
def test_c6_eps_scaling(workdir, record_property):
    for label, coeffs in (("identity", "variant = identity"), ("layered", LAYERED)):
        status, rows, _, _ = _run(workdir, f"c6-{label}", "n = 32", coeffs,
                                  "poles = 0.5, 0.5, 0.5",
                                  "enabled = eps-scaling\neps_scaling.factors = 2, 4, 8")
        slope = _measured(rows, "eps-scaling", "slope")
        record_property(label, f"{slope:.3f}")
        assert status == 0 and abs(slope + 0.5) <= 0.15


@pytest.mark.criterion("C7", "Bogovskii constant stable within 30%, n 32 -> 64")
def test_c7_bogovskii(workdir, record_property):
    kinds = {"whole": "kind = whole", "half": "kind = half",
             "exterior": "kind = exterior\nhole_radius = 0.125"}
    for label, kind in kinds.items():
        c3 = []
        for n in (32, 64):
            status, rows, _, _ = _run(workdir, f"c7-{label}-{n}", f"n = {n}\n{kind}",
                                      "variant = identity", "", "enabled = bogovskii")
            assert status == 0
            c3.append(_measured(rows, "bogovskii", "C3"))
        rel = abs(c3[1] - c3[0]) / c3[0]
        record_property(label, f"{c3[0]:.3f}->{c3[1]:.3f}")
        assert all(0 < c < float("inf") for c in c3)
        assert rel <= 0.30


HOMOGENEOUS = "caccioppoli, pressure, reverse-holder, local-boundedness"


def _homogeneous_run(workdir, label, coeffs, kind, extra_check):
    checks = (f"enabled = {HOMOGENEOUS}, {extra_check}\nhomogeneous.trials = 20\n"
              "homogeneous.refine_n = 48\nreverse_holder.q0 = 2.25\nhomogeneous.spread = 10")
    return _run(workdir, f"c89-{label}-{kind}", f"n = 32\nkind = {kind}", coeffs, "", checks)


@pytest.fixture(scope="session")
def homogeneous_runs(workdir):
    out = {}
    for label, coeffs in (("identity", "variant = identity"), ("layered", LAYERED)):
        out[(label, "whole")] = _homogeneous_run(workdir, label, coeffs, "whole", "assumption-A")
        out[(label, "half")] = _homogeneous_run(workdir, label, coeffs, "half", "assumption-B")
    return out


@pytest.mark.criterion("C8", "inequality ratios: spread < 10x, refinement < 50%")
def test_c8_inequality_stability(homogeneous_runs, record_property):
    for (label, kind), (_, rows, _, _) in homogeneous_runs.items():
        worst_spread = worst_refine = 0.0
        for check in HOMOGENEOUS.split(", "):
            for (c, s), r in rows.items():
                if c != check:
                    continue
                if s == "spread" or s == "spread[q0=2.25]":
                    worst_spread = max(worst_spread, float(r["measured"]))
                    assert float(r["measured"]) < 10, (label, kind, c, s)
                if s.startswith("refinement:max_ratio"):
                    worst_refine = max(worst_refine, float(r["measured"]))
                    assert float(r["measured"]) < 0.5, (label, kind, c, s)
            assert any(c == check and s.startswith("refinement:") for c, s in rows)
        record_property(f"{label}/{kind}", f"spread {worst_spread:.2f}, refine {worst_refine:.3f}")


@pytest.mark.criterion("C9", "Holder certificates C0, C1 finite, refinement within 30%")
def test_c9_holder_certificates(homogeneous_runs, record_property):
    _, rows_w, _, _ = homogeneous_runs[("layered", "whole")]
    _, rows_h, _, _ = homogeneous_runs[("layered", "half")]
    for rows, check, tag in ((rows_w, "assumption-A", "C0"), (rows_h, "assumption-B", "C1")):
        const = _measured(rows, check, "constant")
        rel = _measured(rows, check, "refinement:constant")
        record_property(tag, f"{const:.3f} (refinement {rel:.3f})")
        assert 0 < const < float("inf")
        assert rel <= 0.30


@pytest.mark.criterion("C10", "boundary decay exponent matches alpha2 within 0.2")
def test_c10_boundary_decay(bundled_runs, record_property):
    status, out, _ = bundled_runs["layered-halfspace"][0]
    rows = _rows(out)
    alpha2 = _measured(rows, "boundary-decay", "alpha2")
    slopes = [float(r["measured"]) for (c, s), r in rows.items()
              if c == "boundary-decay" and s.startswith("dx_slope")]
    trace = _measured(rows, "boundary-decay", "wall_trace")
    record_property("alpha2", f"{alpha2:.3f}")
    record_property("dx_slopes", ", ".join(f"{s:.3f}" for s in slopes))
    record_property("wall_trace", f"{trace:g}")
    assert status == 0 and slopes
    assert all(abs(s - alpha2) <= 0.2 for s in slopes)
    assert trace == 0.0


@pytest.mark.criterion("C11", "bundled configs give byte-identical checks.csv")
def test_c11_determinism(bundled_runs, record_property):
    for name, runs in bundled_runs.items():
        texts = [(out / "checks.csv").read_text().split("\n", 1)[1] for _, out, _ in runs]
        assert all(status == 0 for status, _, _ in runs), name
        assert texts[0] == texts[1], name
        record_property(name, f"{len(texts[0].splitlines()) - 1} rows, "
                              f"{runs[0][2]:.0f}s")
    assert bundled_runs["oseen-smoke"][0][2] <= 120
