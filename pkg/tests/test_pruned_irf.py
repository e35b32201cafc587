from fractions import Fraction

import numpy as np
import pytest

from credvol.pruned_irf import (
    MONO2_SPECIALS,
    MONO3_SPECIALS,
    PrunedSolution,
    PrunedState,
    RbcCalibration,
    decompose_impact,
    demo_solution_path,
    irf,
    load_solution,
    mono2,
    mono3,
    pruned_step,
    save_solution,
    simulate_path,
    stochastic_steady_state,
    zeta_ss_bound,
)


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


# ----------------------------------------------------------------------
# straight-line oracle: monomials built entry by entry with loops, the
# recursions transcribed term by term, no shared code with the package
# ----------------------------------------------------------------------


def _naive_mono2(x, e, n):
    vals = []
    for i in range(len(x)):
        for j in range(len(x)):
            vals.append(x[i] * x[j])
    for i in range(len(x)):
        vals.append(x[i] * e)
    for i in range(len(x)):
        vals.append(x[i] * n)
    vals.append(e * e)
    vals.append(e * n)
    vals.append(n * n)
    return np.array(vals)


def _naive_mono3(x, e, n):
    vals = []
    for i in range(len(x)):
        for j in range(len(x)):
            for k in range(len(x)):
                vals.append(x[i] * x[j] * x[k])
    for i in range(len(x)):
        for j in range(len(x)):
            vals.append(x[i] * x[j] * e)
    for i in range(len(x)):
        for j in range(len(x)):
            vals.append(x[i] * x[j] * n)
    for i in range(len(x)):
        vals.append(x[i] * e * e)
    for i in range(len(x)):
        vals.append(x[i] * e * n)
    for i in range(len(x)):
        vals.append(x[i] * n * n)
    vals.append(e**3)
    vals.append(e * e * n)
    vals.append(e * n * n)
    vals.append(n**3)
    return np.array(vals)


def _naive_step(sol, st1, st2, st3, e, n):
    nx = len(st1)
    A = sol.h_v[:, :nx]
    w = np.concatenate([st1, [e, n]])
    new1 = sol.h_v @ w
    new2 = A @ st2 + 2.0 * (sol.H_vv @ _naive_mono2(st1, e, n))
    new3 = (
        A @ st3
        + sol.H_vvv @ _naive_mono3(st1, e, n)
        + 0.5 * (sol.h_ssv @ w)
        + sol.h_sss * sol.sigma_scale**2 / 6.0
    )
    total_prev = st1 + st2 + st3
    y = (
        sol.g_v[:, :nx] @ total_prev
        + 2.0 * (sol.G_vv @ _naive_mono2(st1, e, n))
        + sol.G_vvv @ _naive_mono3(st1, e, n)
        + 0.5 * (sol.g_ssv @ w)
        + sol.g_sss * sol.sigma_scale**2 / 6.0
    )
    return new1, new2, new3, y


def _random_solution(seed, nx=3, ny=4, zero_eta_power_cols=False, cubic_scale=1e-3):
    rng = _rng(seed)
    m2 = nx**2 + 2 * nx + 3
    m3 = nx**3 + 2 * nx**2 + 3 * nx + 4
    A = rng.normal(size=(nx, nx))
    A *= 0.7 / max(abs(np.linalg.eigvals(A)))
    h_v = np.hstack([A, 0.3 * rng.normal(size=(nx, 2))])
    sol = PrunedSolution(
        state_labels=tuple(f"x{i}" for i in range(nx)),
        control_labels=tuple(f"y{i}" for i in range(ny)),
        h_v=h_v,
        H_vv=0.01 * rng.normal(size=(nx, m2)),
        H_vvv=cubic_scale * rng.normal(size=(nx, m3)),
        h_ssv=0.01 * rng.normal(size=(nx, nx + 2)),
        h_sss=0.001 * rng.normal(size=nx),
        g_v=rng.normal(size=(ny, nx + 2)),
        G_vv=0.01 * rng.normal(size=(ny, m2)),
        G_vvv=cubic_scale * rng.normal(size=(ny, m3)),
        g_ssv=0.01 * rng.normal(size=(ny, nx + 2)),
        g_sss=0.001 * rng.normal(size=ny),
    )
    if zero_eta_power_cols:
        G_vv = sol.G_vv.copy()
        G_vvv = sol.G_vvv.copy()
        G_vv[:, MONO2_SPECIALS(nx)["eta_sq"]] = 0.0
        G_vvv[:, MONO3_SPECIALS(nx)["eta_cubed"]] = 0.0
        sol = PrunedSolution(
            state_labels=sol.state_labels,
            control_labels=sol.control_labels,
            h_v=sol.h_v,
            H_vv=sol.H_vv,
            H_vvv=sol.H_vvv,
            h_ssv=sol.h_ssv,
            h_sss=sol.h_sss,
            g_v=sol.g_v,
            G_vv=G_vv,
            G_vvv=G_vvv,
            g_ssv=sol.g_ssv,
            g_sss=sol.g_sss,
        )
    return sol


# ------------------------------------------------------------- monomials


def test_monomial_vectors_match_loop_enumeration():
    rng = _rng(2)
    for nx in (1, 2, 3, 4):
        x = rng.normal(size=nx)
        e, n = rng.normal(size=2)
        np.testing.assert_allclose(mono2(x, e, n), _naive_mono2(x, e, n), rtol=1e-15)
        np.testing.assert_allclose(mono3(x, e, n), _naive_mono3(x, e, n), rtol=1e-15)


def test_monomial_special_indices():
    # the labeled columns must sit where the enumeration puts them
    for nx in (1, 2, 3, 5):
        x = np.zeros(nx)
        s2 = MONO2_SPECIALS(nx)
        s3 = MONO3_SPECIALS(nx)
        v2 = mono2(x, 2.0, 3.0)
        assert v2[s2["eps_sq"]] == 4.0
        assert v2[s2["eps_eta"]] == 6.0
        assert v2[s2["eta_sq"]] == 9.0
        v3 = mono3(x, 2.0, 3.0)
        assert v3[s3["eps_cubed"]] == 8.0
        assert v3[s3["eps_sq_eta"]] == 12.0
        assert v3[s3["eps_eta_sq"]] == 18.0
        assert v3[s3["eta_cubed"]] == 27.0


# ------------------------------------------------------------- stepping


def test_step_matches_naive_oracle_over_50_steps():
    for seed in (10, 11, 12):
        sol = _random_solution(seed)
        rng = _rng(100 + seed)
        st = PrunedState.zeros(sol.n_x)
        n1 = np.zeros(sol.n_x)
        n2 = np.zeros(sol.n_x)
        n3 = np.zeros(sol.n_x)
        for _ in range(50):
            e, n = rng.normal(size=2)
            st, y = pruned_step(sol, st, (e, n))
            n1, n2, n3, y_naive = _naive_step(sol, n1, n2, n3, e, n)
            np.testing.assert_allclose(st.first, n1, rtol=0, atol=1e-12)
            np.testing.assert_allclose(st.second, n2, rtol=0, atol=1e-12)
            np.testing.assert_allclose(st.third, n3, rtol=0, atol=1e-12)
            np.testing.assert_allclose(y, y_naive, rtol=0, atol=1e-12)


def test_zero_state_zero_shock_step():
    sol = _random_solution(20)
    st, y = pruned_step(sol, PrunedState.zeros(sol.n_x), (0.0, 0.0))
    assert np.all(st.first == 0.0)
    assert np.all(st.second == 0.0)
    np.testing.assert_allclose(st.third, sol.h_sss / 6.0, rtol=1e-15)
    np.testing.assert_allclose(y, sol.g_sss / 6.0, rtol=1e-15)


def test_linearization_limit():
    # zeroing every higher-order block leaves the first-order recursion
    base = _random_solution(21)
    zeros_like = lambda a: np.zeros_like(a)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=zeros_like(base.H_vv),
        H_vvv=zeros_like(base.H_vvv),
        h_ssv=zeros_like(base.h_ssv),
        h_sss=zeros_like(base.h_sss),
        g_v=base.g_v,
        G_vv=zeros_like(base.G_vv),
        G_vvv=zeros_like(base.G_vvv),
        g_ssv=zeros_like(base.g_ssv),
        g_sss=zeros_like(base.g_sss),
    )
    rng = _rng(22)
    T = 30
    eps = rng.normal(size=T)
    eta = rng.normal(size=T)
    states, controls = simulate_path(sol, PrunedState.zeros(sol.n_x), eps, eta)
    A = sol.h_v[:, : sol.n_x]
    B = sol.h_v[:, sol.n_x :]
    x = np.zeros(sol.n_x)
    for t in range(T):
        y_lin = sol.g_v[:, : sol.n_x] @ x
        x = A @ x + B @ np.array([eps[t], eta[t]])
        np.testing.assert_allclose(states[t], x, rtol=0, atol=1e-13)
        np.testing.assert_allclose(controls[t], y_lin, rtol=0, atol=1e-13)


def test_dimension_mismatch_rejected():
    sol = _random_solution(23)
    bad = PrunedState(
        first=np.zeros(sol.n_x + 1),
        second=np.zeros(sol.n_x + 1),
        third=np.zeros(sol.n_x + 1),
    )
    with pytest.raises(ValueError, match="state"):
        pruned_step(sol, bad, (0.0, 0.0))


def test_pruning_stability_long_run():
    # spectral radius < 1 keeps the zero-shock path bounded for 10^4 steps
    sol = _random_solution(24)
    T = 10_000
    states, controls = simulate_path(
        sol, PrunedState.zeros(sol.n_x), np.zeros(T), np.zeros(T)
    )
    assert np.all(np.isfinite(states))
    assert np.all(np.abs(states) < 1e3)
    assert np.all(np.abs(controls) < 1e4)


# ---------------------------------------------------- steady state / IRF


def test_stochastic_steady_state_closed_form():
    # with zero shocks the fixed point solves (I - A) x3 = h_sss sigma^2/6
    sol = _random_solution(30)
    st, y = stochastic_steady_state(sol)
    A = sol.h_v[:, : sol.n_x]
    expected3 = np.linalg.solve(np.eye(sol.n_x) - A, sol.h_sss / 6.0)
    np.testing.assert_allclose(st.first, 0.0, atol=1e-13)
    np.testing.assert_allclose(st.second, 0.0, atol=1e-13)
    # iteration stops on a 1e-12 step, leaving O(1e-12) distance to go
    np.testing.assert_allclose(st.third, expected3, rtol=0, atol=1e-11)
    y_expected = sol.g_v[:, : sol.n_x] @ expected3 + sol.g_sss / 6.0
    np.testing.assert_allclose(y, y_expected, rtol=0, atol=1e-10)


def test_stochastic_steady_state_divergence_reported():
    base = _random_solution(31)
    h_v = base.h_v.copy()
    h_v[:, : base.n_x] *= 1.5 / 0.7  # push the spectral radius above one
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=h_v,
        H_vv=base.H_vv,
        H_vvv=base.H_vvv,
        h_ssv=base.h_ssv,
        h_sss=base.h_sss,
        g_v=base.g_v,
        G_vv=base.G_vv,
        G_vvv=base.G_vvv,
        g_ssv=base.g_ssv,
        g_sss=base.g_sss,
    )
    with pytest.raises(RuntimeError, match="did not converge"):
        stochastic_steady_state(sol, max_iter=2000)


def test_irf_zero_size_is_identically_zero():
    sol = _random_solution(32)
    paths = irf(sol, "eta_star", size=0.0, horizon=10)
    for label, path in paths.items():
        np.testing.assert_array_equal(path, np.zeros(11)), label


def test_linear_irf_closed_form():
    base = _random_solution(33)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=np.zeros_like(base.H_vv),
        H_vvv=np.zeros_like(base.H_vvv),
        h_ssv=np.zeros_like(base.h_ssv),
        h_sss=np.zeros_like(base.h_sss),
        g_v=base.g_v,
        G_vv=np.zeros_like(base.G_vv),
        G_vvv=np.zeros_like(base.G_vvv),
        g_ssv=np.zeros_like(base.g_ssv),
        g_sss=np.zeros_like(base.g_sss),
    )
    H = 8
    paths = irf(sol, "eps_zeta", size=1.0, horizon=H)
    A = sol.h_v[:, : sol.n_x]
    impact = sol.h_v[:, sol.n_x]
    x = impact.copy()
    for t in range(H + 1):
        for i, lab in enumerate(sol.state_labels):
            assert abs(paths[lab][t] - x[i]) < 1e-12
        if t < H:
            # controls respond one period later through the state block
            y_next = sol.g_v[:, : sol.n_x] @ x
            for i, lab in enumerate(sol.control_labels):
                assert abs(paths[lab][t + 1] - y_next[i]) < 1e-12
        x = A @ x
    # impact period: controls see only lagged states, hence zero response
    for lab in sol.control_labels:
        assert paths[lab][0] == 0.0


def test_girf_equals_deterministic_irf_for_linear_solution():
    base = _random_solution(34)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=np.zeros_like(base.H_vv),
        H_vvv=np.zeros_like(base.H_vvv),
        h_ssv=np.zeros_like(base.h_ssv),
        h_sss=np.zeros_like(base.h_sss),
        g_v=base.g_v,
        G_vv=np.zeros_like(base.G_vv),
        G_vvv=np.zeros_like(base.G_vvv),
        g_ssv=np.zeros_like(base.g_ssv),
        g_sss=np.zeros_like(base.g_sss),
    )
    det = irf(sol, "eta_star", size=1.3, horizon=6)
    gir = irf(sol, "eta_star", size=1.3, horizon=6, integrate_level_shock=True)
    for lab in det:
        np.testing.assert_allclose(gir[lab], det[lab], rtol=0, atol=1e-11)


def test_girf_matches_monte_carlo():
    # batched simulation with shared level-shock draws as the second route
    sol = _random_solution(35, nx=2, ny=2, cubic_scale=1e-2)
    size, H = 1.0, 3
    gir = irf(sol, "eta_star", size=size, horizon=H, integrate_level_shock=True, start="zero")

    rng = _rng(99)
    N = 200_000
    nx = sol.n_x
    eps = rng.normal(size=(H + 1, N))
    A = sol.h_v[:, :nx]
    B = sol.h_v[:, nx:]

    def batch_paths(eta0):
        x1 = np.zeros((nx, N))
        x2 = np.zeros((nx, N))
        x3 = np.zeros((nx, N))
        ys = []
        for t in range(H + 1):
            eta = eta0 if t == 0 else 0.0
            e = eps[t]
            # batched monomials, columns = draws
            m2_rows = [x1[i] * x1[j] for i in range(nx) for j in range(nx)]
            m2_rows += [x1[i] * e for i in range(nx)]
            m2_rows += [x1[i] * eta for i in range(nx)]
            m2_rows += [e * e, e * eta * np.ones(N), eta * eta * np.ones(N)]
            m2 = np.vstack(m2_rows)
            m3_rows = [x1[i] * x1[j] * x1[k] for i in range(nx) for j in range(nx) for k in range(nx)]
            m3_rows += [x1[i] * x1[j] * e for i in range(nx) for j in range(nx)]
            m3_rows += [x1[i] * x1[j] * eta for i in range(nx) for j in range(nx)]
            m3_rows += [x1[i] * e * e for i in range(nx)]
            m3_rows += [x1[i] * e * eta for i in range(nx)]
            m3_rows += [x1[i] * eta * eta for i in range(nx)]
            m3_rows += [e**3, e * e * eta, e * eta * eta, eta**3 * np.ones(N)]
            m3 = np.vstack(m3_rows)
            w = np.vstack([x1, e[None, :], np.full((1, N), eta)])
            total_prev = x1 + x2 + x3
            y = (
                sol.g_v[:, :nx] @ total_prev
                + 2.0 * (sol.G_vv @ m2)
                + sol.G_vvv @ m3
                + 0.5 * (sol.g_ssv @ w)
                + (sol.g_sss / 6.0)[:, None]
            )
            ys.append(y)
            shocks = np.vstack([e[None, :], np.full((1, N), eta)])
            x1_new = A @ x1 + B @ shocks
            x2_new = A @ x2 + 2.0 * (sol.H_vv @ m2)
            x3_new = A @ x3 + sol.H_vvv @ m3 + 0.5 * (sol.h_ssv @ w) + (sol.h_sss / 6.0)[:, None]
            x1, x2, x3 = x1_new, x2_new, x3_new
        return ys

    ys_shock = batch_paths(size)
    ys_base = batch_paths(0.0)
    for t in range(H + 1):
        diff = ys_shock[t] - ys_base[t]  # same eps draws cancel most noise
        mc_mean = diff.mean(axis=1)
        mc_se = diff.std(axis=1) / np.sqrt(N)
        for i, lab in enumerate(sol.control_labels):
            assert abs(gir[lab][t] - mc_mean[i]) < 6.0 * mc_se[i] + 1e-10, (t, lab)


def test_percent_deviation_for_level_variables():
    base = _random_solution(60)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=base.H_vv,
        H_vvv=base.H_vvv,
        h_ssv=base.h_ssv,
        h_sss=base.h_sss,
        g_v=base.g_v,
        G_vv=base.G_vv,
        G_vvv=base.G_vvv,
        g_ssv=base.g_ssv,
        g_sss=np.full(base.n_y, 18.0),  # keep baselines away from zero
        control_in_logs=(False,) * base.n_y,
    )
    H = 5
    paths = irf(sol, "eta_star", size=1.0, horizon=H)
    st0, _ = stochastic_steady_state(sol)
    zero = np.zeros(H + 1)
    eta = zero.copy()
    eta[0] = 1.0
    _, y_shock = simulate_path(sol, st0, zero, eta)
    _, y_base = simulate_path(sol, st0, zero, zero)
    for i, lab in enumerate(sol.control_labels):
        manual = 100.0 * (y_shock[:, i] - y_base[:, i]) / np.abs(y_base[:, i])
        np.testing.assert_allclose(paths[lab], manual, rtol=1e-12)


def test_percent_deviation_rejects_zero_baseline():
    base = _random_solution(61)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=base.H_vv,
        H_vvv=base.H_vvv,
        h_ssv=base.h_ssv,
        h_sss=np.zeros(base.n_x),  # zero fixed point, so baselines vanish
        g_v=base.g_v,
        G_vv=np.zeros_like(base.G_vv),
        G_vvv=base.G_vvv,
        g_ssv=base.g_ssv,
        g_sss=np.zeros(base.n_y),
        control_in_logs=(False,) * base.n_y,
    )
    with pytest.raises(ValueError, match="percent"):
        irf(sol, "eta_star", size=1.0, horizon=3)


def test_irf_argument_validation():
    sol = _random_solution(62)
    with pytest.raises(ValueError, match="horizon"):
        irf(sol, "eta_star", horizon=0)
    with pytest.raises(ValueError, match="shock"):
        irf(sol, "volatility", horizon=4)
    with pytest.raises(ValueError, match="start"):
        irf(sol, "eta_star", horizon=4, start="mean")
    with pytest.raises(ValueError, match="eta_star"):
        irf(sol, "eps_zeta", horizon=4, integrate_level_shock=True)


# ---------------------------------------------------------- decomposition


def test_decompose_additivity_exact():
    for seed in (40, 41, 42):
        sol = _random_solution(seed)
        table = decompose_impact(sol, eta_star=0.7)
        assert list(table.columns) == ["variable", "direct", "interaction", "total"]
        assert list(table["variable"]) == list(sol.control_labels)
        np.testing.assert_array_equal(
            table["total"].to_numpy(),
            table["direct"].to_numpy() + table["interaction"].to_numpy(),
        )


def test_decompose_scales_linearly_in_shock():
    sol = _random_solution(43)
    one = decompose_impact(sol, eta_star=1.0)
    two = decompose_impact(sol, eta_star=2.0)
    np.testing.assert_array_equal(two["direct"].to_numpy(), 2.0 * one["direct"].to_numpy())
    np.testing.assert_array_equal(
        two["interaction"].to_numpy(), 2.0 * one["interaction"].to_numpy()
    )


def test_decompose_zero_cubic_block_kills_interaction():
    base = _random_solution(44)
    sol = PrunedSolution(
        state_labels=base.state_labels,
        control_labels=base.control_labels,
        h_v=base.h_v,
        H_vv=base.H_vv,
        H_vvv=np.zeros_like(base.H_vvv),
        h_ssv=base.h_ssv,
        h_sss=base.h_sss,
        g_v=base.g_v,
        G_vv=base.G_vv,
        G_vvv=np.zeros_like(base.G_vvv),
        g_ssv=base.g_ssv,
        g_sss=base.g_sss,
    )
    table = decompose_impact(sol, eta_star=1.0)
    assert np.all(table["interaction"].to_numpy() == 0.0)


def test_decompose_agrees_with_integrated_impact():
    # with the eta^2 / eta^3 control columns zeroed, the horizon-0
    # integrated response from a zero start is exactly direct+interaction
    sol = _random_solution(45, zero_eta_power_cols=True)
    eta = 0.9
    table = decompose_impact(sol, eta_star=eta)
    paths = irf(sol, "eta_star", size=eta, horizon=1, integrate_level_shock=True, start="zero")
    for _, row in table.iterrows():
        assert abs(row["total"] - paths[row["variable"]][0]) < 1e-10


# ------------------------------------------------------------ calibration


def test_calibration_defaults():
    c = RbcCalibration()
    assert c.alpha == 0.33
    assert c.beta_disc == 0.99
    assert c.delta == 0.02
    assert c.phi_adj == 4.0
    assert c.theta_labor == 5.7241
    assert c.gamma_c == 1.0
    assert c.chi == 1.0
    assert c.zeta_ss == 0.017
    assert c.h_bar == -10.12
    assert c.rho_h == 0.91
    assert c.tau == 0.25
    assert c.rho_ar == 0.83
    assert c.nu == 0.0
    assert c.theta_r == 9.0


def test_calibration_validation():
    with pytest.raises(ValueError, match="alpha"):
        RbcCalibration(alpha=1.0)
    with pytest.raises(ValueError, match="beta_disc"):
        RbcCalibration(beta_disc=1.2)
    with pytest.raises(ValueError, match="delta"):
        RbcCalibration(delta=-0.1)
    with pytest.raises(ValueError, match="zeta_ss"):
        RbcCalibration(zeta_ss=0.0)
    with pytest.raises(ValueError, match="nu"):
        RbcCalibration(nu=1.0)


def test_borrowing_bound_value_and_flag():
    # exact rational arithmetic as the oracle for the default calibration
    expected = Fraction(67, 33) * (Fraction(100, 99) - Fraction(49, 50))
    res = zeta_ss_bound(RbcCalibration())
    assert abs(res.bound - float(expected)) < 1e-15
    assert abs(res.bound - 0.0611) < 1e-4
    assert res.admissible  # 0.017 < bound
    assert "0.0602" in res.note


def test_borrowing_bound_algebraic_collapse():
    # alpha = 1/2 and beta = 1 collapse the formula to delta itself
    for delta in (0.01, 0.02, 0.3):
        res = zeta_ss_bound(RbcCalibration(alpha=0.5, beta_disc=1.0 - 1e-12, delta=delta))
        assert abs(res.bound - delta) < 1e-9


def test_borrowing_bound_flag_false_when_violated():
    res = zeta_ss_bound(RbcCalibration(zeta_ss=0.09))
    assert not res.admissible


# ------------------------------------------------------------ file format


def test_solution_round_trip(tmp_path):
    sol = _random_solution(50)
    p = tmp_path / "sol.txt"
    save_solution(sol, p)
    back = load_solution(p)
    assert back.state_labels == sol.state_labels
    assert back.control_labels == sol.control_labels
    assert back.state_in_logs == sol.state_in_logs
    assert back.control_in_logs == sol.control_in_logs
    for name in ("h_v", "H_vv", "H_vvv", "h_ssv", "h_sss", "g_v", "G_vv", "G_vvv", "g_ssv", "g_sss"):
        np.testing.assert_array_equal(getattr(back, name), getattr(sol, name)), name
    assert back.sigma_scale == sol.sigma_scale


def test_loader_rejects_wrong_dimensions(tmp_path):
    sol = _random_solution(51)
    p = tmp_path / "sol.txt"
    save_solution(sol, p)
    text = p.read_text().replace("matrix H_vv 3 18", "matrix H_vv 3 17")
    p.write_text(text)
    with pytest.raises(ValueError, match="H_vv"):
        load_solution(p)


def test_loader_rejects_missing_block(tmp_path):
    sol = _random_solution(52)
    p = tmp_path / "sol.txt"
    save_solution(sol, p)
    lines = p.read_text().splitlines()
    start = lines.index("matrix g_sss 4 1")
    del lines[start : start + 5]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="g_sss"):
        load_solution(p)


def test_loader_rejects_unknown_header(tmp_path):
    p = tmp_path / "sol.txt"
    p.write_text("not-a-solution\n")
    with pytest.raises(ValueError, match="header"):
        load_solution(p)


def test_solution_dimension_validation():
    base = _random_solution(53)
    with pytest.raises(ValueError, match="H_vvv"):
        PrunedSolution(
            state_labels=base.state_labels,
            control_labels=base.control_labels,
            h_v=base.h_v,
            H_vv=base.H_vv,
            H_vvv=base.H_vvv[:, :-1],
            h_ssv=base.h_ssv,
            h_sss=base.h_sss,
            g_v=base.g_v,
            G_vv=base.G_vv,
            G_vvv=base.G_vvv,
            g_ssv=base.g_ssv,
            g_sss=base.g_sss,
        )


# ------------------------------------------------------------- demo file


def test_demo_solution_loads_and_is_stable():
    sol = load_solution(demo_solution_path())
    assert sol.n_x == 3
    assert len(sol.control_labels) == 9
    A = sol.h_v[:, : sol.n_x]
    assert max(abs(np.linalg.eigvals(A))) < 1.0


def test_demo_uncertainty_shock_is_recessionary_on_impact():
    # integrated impact response: activity variables all fall together
    sol = load_solution(demo_solution_path())
    paths = irf(sol, "eta_star", size=1.0, horizon=4, integrate_level_shock=True, start="zero")
    for lab in ("consumption", "investment", "gdp", "hours"):
        assert paths[lab][0] < 0.0, lab
    assert paths["wedge"][0] > 0.0
    assert paths["marginal_utility"][0] > 0.0


def test_demo_decomposition_additivity():
    sol = load_solution(demo_solution_path())
    table = decompose_impact(sol, eta_star=1.0)
    np.testing.assert_array_equal(
        table["total"].to_numpy(),
        table["direct"].to_numpy() + table["interaction"].to_numpy(),
    )
    row = table.set_index("variable").loc["consumption"]
    assert abs(row["direct"] - (-0.099)) < 1e-9
    assert abs(row["interaction"] - (-0.081)) < 1e-9
