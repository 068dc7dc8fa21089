# SPDX-License-Identifier: Apache-2.0
"""Smoke test for the rvbsim extension module."""

import math

import rvbsim


def main():
    assert abs(rvbsim.f_ss(50.0, 50.0) - 50.0) < 1e-12
    vx, vy = rvbsim.visibilities(50.0, 50.0)
    assert vx == 0.75 and vy == 0.75

    j = rvbsim.ExchangeConfig.balanced(60.0, 30.0)
    assert j.jx == 60.0 and j.jy == 30.0
    assert abs(rvbsim.f_st_exact(j) - 15.0) < 1e-9

    t = [float(k) for k in range(0, 300, 2)]
    rows = rvbsim.simulate("singlet_x", rvbsim.ExchangeConfig(25, 25, 25, 25), t, t_phi_ns=130.0, n_samples=400, seed=1)
    p = [r[0][0] for r in rows]
    assert abs(p[0] - 1.0) < 1e-12
    for r in rows:
        assert abs(sum(r[0]) - 1.0) < 1e-12 and abs(sum(r[1]) - 1.0) < 1e-12
    fit = rvbsim.fit_damped_cosine(t, p)
    assert abs(fit.f - 50.0) < 0.5, fit
    assert abs(fit.t_phi / 130.0 - 1.0) < 0.1, fit

    jx, jy = rvbsim.calibration_error(50.0, 50.0, 2.0)
    assert 2.0 <= jy <= 3.0 and 2.0 <= jx <= 3.0

    p0 = rvbsim.p_st_degenerate(50.0, 2.0, 1.5, 0.0)
    assert abs(p0 - 1.0) < 1e-12

    fig = rvbsim.figure("fig5ef")
    cut = fig["fig5gh"]
    assert abs(sum(cut["P_S12S34"]) / len(cut["P_S12S34"]) - 0.25) < 5e-3
    assert "fig4b" in rvbsim.FIGURES

    ok, detail = rvbsim.criterion(2)
    assert ok, detail

    try:
        rvbsim.figure("nope")
    except ValueError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown figure accepted")

    assert math.isfinite(rvbsim.exchange_from_voltages(50.0, 50.0, 1.0, -1.0).jx)
    print("rvbsim smoke test passed")


if __name__ == "__main__":
    main()
