"""Smoke test for the coolcorr_py extension module.

Build and install first:
    pip install -e crates/coolcorr-py --no-build-isolation
then run with pytest or as a script.
"""

import math

import coolcorr_py as cc


def test_gibbs_and_bound():
    p = cc.gibbs_populations([0.0, 1.0], 1.0)
    assert abs(p[0] - 1.0 / (1.0 + math.exp(-1.0))) < 1e-14
    b = cc.universal_bound_state(3, 2.0, 1.0)
    assert abs(sum(b) - 1.0) < 1e-14
    assert abs(b[1] / b[0] - math.exp(-2.0)) < 1e-14


def test_one_qubit_work_matches_lp():
    r_s = 1.0 / (1.0 + math.exp(-1.0))
    r_m = 1.0 / (1.0 + math.exp(-2.0))
    r = 0.5 * (r_s + r_m)
    closed = cc.one_qubit_work(1.0, 2.0, 1.0, r)
    assert abs(closed - (r - r_s) * 1.0) < 1e-14
    assert abs(cc.min_work([0.0, 1.0], [0.0, 2.0], 1.0, r) - closed) < 1e-9


def test_symmetric_thermalization_d3():
    out = cc.symmetric_thermalization([0.0, 0.6, 1.5], 1.0, 0.4, "passing-norm")
    assert out["residual"] < 1e-9
    assert out["marginal_error"] < 1e-8
    assert abs(out["mutual_information"] - out["expected_information"]) < 1e-8
    assert not out["rerouted"]


def test_pure_state_and_oracle():
    opt = cc.pure_state_optimum([0.0, 1.0], [0.0, 1.0], 0.5)
    assert opt["energy_residual"] < 1e-10
    res = cc.oracle([0.0, 1.0], [0.0, 1.0], math.inf, 0.5, samples=200, seed=3)
    assert res["best_info"] <= opt["info"] + 1e-9


def test_errors_map_to_python_exceptions():
    try:
        cc.symmetric_thermalization([0.0, 1.0, 2.0], 1.0, 2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("colder target should be rejected")


def test_run_config_bound():
    text = "system_energies = 0, 1, 2\nmachine_energies = 0, 0.8, 1.9\n"
    digest, table = cc.run_config("bound", text)
    assert len(digest) == 64
    assert table["level"] == [0, 1, 2]
    assert all(abs(a - b) < 1e-8 for a, b in zip(table["bound_pop"], table["limit_pop"]))


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
