"""End-to-end acceptance checks; each records one pass/fail line in the terminal summary."""

import time


import numpy as np
import pytest

from osclab import lab
from osclab.cli import _smooth_pair, main
from osclab.coefficients import beta_closed_form, closed_form_coefficients, estimate_coefficients, gamma_closed_form
from osclab.scenarios import get_scenario

pytestmark = pytest.mark.acceptance


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_1_coefficients(record):
    with Clock() as clk:
        saw = get_scenario("flat_sawtooth")
        x = np.linspace(-1, 1, 101)
        g_closed = gamma_closed_form(saw, x)
        est = lab.coefficients_study(saw, n_hats=32, tol=1e-2)
        g_est = est.columns["gamma_est [1]"]
        b_rel = np.abs(est.columns["beta_est [1]"] / est.columns["beta_closed [1]"] - 1)
        g_rel = np.abs(g_est / np.sqrt(2) - 1)
        const = get_scenario("flat_constant")
        c = 2.0
        cf = closed_form_coefficients(const)
        ec = estimate_coefficients(const)
        b_err = max(np.abs(beta_closed_form(const, x) - c).max(), np.abs(ec.beta.values - c).max())
        g_err = max(np.abs(np.asarray(cf.gamma(x)) - 1).max(), np.abs(ec.gamma.values - 1).max())
    ok = (np.abs(g_closed - np.sqrt(2)).max() < 1e-12 and len(g_est) == 32 and g_rel.max() <= 1e-2
          and b_rel.max() <= 1e-2 and b_err <= 1e-3 and g_err <= 1e-8 and clk.seconds < 10)
    record(1, ok, f"sawtooth gamma rel {g_rel.max():.2e}, beta rel {b_rel.max():.2e}; "
                  f"constant beta err {b_err:.2e}, gamma err {g_err:.2e}; {clk.seconds:.1f} s")
    assert ok


def test_criterion_2_concentrated_integrals(record):
    sc = get_scenario("annulus_sine")
    assert len(sc.ladder) == 7
    with Clock() as clk:
        h, phi = _smooth_pair()
        reps = [lab.concentrated_limit_study(sc, tol=1e-2), lab.concentrated_limit_study(sc, h, phi, tol=1e-2)]
    checks = []
    for rep in reps:
        dev = rep.columns["deviation [1]"]
        checks.append((lab.non_increasing(dev, atol=1e-12 * abs(rep.target)),
                       abs(rep.limit - rep.target) / abs(rep.target)))
    ok = all(d and e <= 1e-2 for d, e in checks) and clk.seconds < 60
    labels = ("h = phi = 1", "h = 1 + x^2/2, phi = cos y")
    record(2, ok, "; ".join(f"{n}: decreasing={d} extrapolated rel gap {e:.2e}" for n, (d, e) in zip(labels, checks))
           + f"; {clk.seconds:.1f} s")
    assert ok


def test_criterion_3_beta_uniqueness(record):
    with Clock() as clk:
        rep = lab.uniqueness_study(get_scenario("annulus_sine"), tol=1e-3)
    diff = rep.columns["difference [1]"].max()
    ok = diff <= 1e-3 and clk.seconds < 30
    record(3, ok, f"max pointwise beta difference {diff:.2e}; {clk.seconds:.1f} s")
    assert ok


def test_criterion_4_boundary_measure(record):
    sc = get_scenario("flat_sawtooth")
    with Clock() as clk:
        rep = lab.boundary_measure_study(sc, tol=2e-2)
    fixed = rep.artifacts["fixed_length"]
    lengths = rep.columns["length [length]"]
    gap_gamma = np.abs(lengths / (np.sqrt(2) * fixed) - 1).max()
    gap_fixed = np.abs(lengths / fixed - 1).min()
    ok = gap_gamma <= 2e-2 and gap_fixed >= 0.4 and clk.seconds < 30
    record(4, ok, f"max gap to sqrt2 |boundary| {gap_gamma:.2e}, min gap to |boundary| {gap_fixed:.3f}; "
                  f"{clk.seconds:.1f} s")
    assert ok


def test_criterion_5_trace_constants(record):
    sc = get_scenario("flat_sawtooth")
    assert np.allclose(sc.ladder, sc.eps0 * 0.5 ** np.arange(7))
    with Clock() as clk:
        rep = lab.trace_constant_study(sc, ratio_bound=2.0, parallel=True)
    rb, rs = rep.artifacts["ratios"]
    ok = rb <= 2.0 and rs <= 2.0 and clk.seconds < 300
    record(5, ok, f"max/min boundary {rb:.3f}, strip {rs:.3f}; {clk.seconds:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def main_ladder():
    sc = get_scenario("flat_sine")
    assert (sc.nonlinearity.f_law.name, sc.nonlinearity.g_law.name) == ("one", "linear")
    with Clock() as clk:
        ls = lab.solve_ladder(sc, lab.coefficients_for(sc))
    return sc, ls, clk.seconds


def test_criterion_6_main_convergence(record, main_ladder):
    sc, ls, t_ladder = main_ladder
    with Clock() as clk:
        rep = lab.main_convergence_study(sc, floor_factor=3.0, ladder_solutions=ls)
    h1 = rep.columns["h1_dist [1]"]
    gap = rep.columns["pairing_gap [1]"]
    dec, gdec = lab.non_increasing(h1), lab.non_increasing(gap)
    seconds = t_ladder + clk.seconds
    ok = dec and gdec and rep.limit <= 3.0 * rep.floor and seconds < 600
    record(6, ok, f"H1 distance {h1[0]:.3e} -> {h1[-1]:.3e} (decreasing={dec}), extrapolated {rep.limit:.2e} "
                  f"vs 3 x floor {3 * rep.floor:.2e}; pairing gap decreasing={gdec}; {seconds:.0f} s")
    assert ok


def test_criterion_7_eigenvalues(record, main_ladder):
    sc, ls, t_ladder = main_ladder
    with Clock() as clk:
        rep = lab.eigen_convergence_study(sc, k=5, floor_factor=5.0, ladder_solutions=ls)
    gaps = np.column_stack([rep.columns[f"gap_{j} [1]"] for j in range(1, 6)])
    lam0 = rep.artifacts["limit_eigenvalues"]
    mono = all(lab.non_increasing(gaps[:, j], start=1, atol=1e-9 * max(1.0, abs(lam0[j]))) for j in range(5))
    final = gaps[-1].max()
    seconds = t_ladder + clk.seconds
    ok = mono and final <= 5.0 * rep.floor and seconds < 600
    record(7, ok, f"gaps monotone after first point={mono}, final gap {final:.3e} vs 5 x floor "
                  f"{5 * rep.floor:.3e}; {seconds:.0f} s")
    assert ok


def test_criterion_8_fem_self_verification(record):
    with Clock() as clk:
        mms = lab.manufactured_solution_study()
        lam = lab.neumann_eigenvalues(n=64, k=4)
    r_h1 = np.nanmin(mms.columns["h1_rate [1]"])
    r_l2 = np.nanmin(mms.columns["l2_rate [1]"])
    exact = 1 + np.pi ** 2 * np.array([0.0, 1.0, 1.0, 2.0])
    rel = np.abs(lam / exact - 1).max()
    ok = r_h1 >= 0.9 and r_l2 >= 1.8 and rel <= 1e-2 and clk.seconds < 120
    record(8, ok, f"H1 rate {r_h1:.3f}, L2 rate {r_l2:.3f}, eigenvalue rel err {rel:.2e}; {clk.seconds:.1f} s")
    assert ok


def test_criterion_9_determinism(record, tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text("scenario = flat_sine\nseed = 11\n[ladder]\nlevels = 3\n[solver]\nperturbation = 0.05\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["run", "--config", str(cfg), "--study", "all", "--out", str(o)]) for o in outs]
    files = sorted(p.name for p in outs[0].glob("*.csv"))
    same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in files]
    ok = len(files) >= 6 and all(same) and sorted(p.name for p in outs[1].glob("*.csv")) == files
    record(9, ok, f"{sum(same)}/{len(files)} CSVs bit-identical (exit codes {codes})")
    assert ok
