import numpy as np
import pytest

from d2dgames import radio
from d2dgames.oracle import solve_min_power
from d2dgames.power_control import (
    PowerGameInstance,
    best_response_step,
    power_game_from_radio,
    run_power_game,
)


def _two_player_symmetric(cross=0.2):
    return PowerGameInstance(
        gains=np.array([[1.0, cross], [cross, 1.0]]),
        targets=np.array([2.0, 2.0]),
        noise_w=np.array([0.5, 0.5]),
        p_max_w=100.0,
    )


def _random_instance(rng, n, cross_scale=0.1, p_max=1e3):
    direct = rng.uniform(0.5, 2.0, n)
    g = rng.uniform(0.0, cross_scale, (n, n))
    np.fill_diagonal(g, direct)
    return PowerGameInstance(
        gains=g,
        targets=rng.uniform(0.5, 4.0, n),
        noise_w=rng.uniform(0.1, 1.0, n),
        p_max_w=p_max,
    )


class TestBestResponseStep:
    def test_single_player_closed_form(self):
        inst = PowerGameInstance(
            gains=np.array([[2.0]]),
            targets=np.array([4.0]),
            noise_w=np.array([0.5]),
            p_max_w=10.0,
        )
        p1 = best_response_step(inst, np.zeros(1))
        assert p1[0] == pytest.approx(4.0 * 0.5 / 2.0, rel=1e-12)
        # already the fixed point: returned unchanged
        p2 = best_response_step(inst, p1)
        assert p2[0] == pytest.approx(p1[0], rel=1e-12)

    def test_fixed_point_returned_unchanged(self):
        inst = _two_player_symmetric()
        sol = solve_min_power(inst)
        assert sol.feasible
        p_next = best_response_step(inst, sol.powers)
        np.testing.assert_allclose(p_next, sol.powers, rtol=1e-12)

    def test_two_player_matches_linear_solve(self):
        # oracle: hand 2x2 elimination of (I - F) p = u
        inst = _two_player_symmetric(cross=0.2)
        f = 2.0 * 0.2 / 1.0
        u = 2.0 * 0.5 / 1.0
        p_hand = u * (1 + f) / (1 - f * f)  # symmetric solution
        trace = run_power_game(inst, max_iters=5000, tol=1e-15)
        assert trace.converged
        np.testing.assert_allclose(trace.final, [p_hand, p_hand], rtol=1e-6)

    def test_zero_direct_gain_rejected(self):
        with pytest.raises(ValueError):
            PowerGameInstance(
                gains=np.array([[0.0]]),
                targets=np.array([1.0]),
                noise_w=np.array([1.0]),
                p_max_w=1.0,
            )

    def test_out_of_range_power_rejected(self):
        inst = _two_player_symmetric()
        with pytest.raises(ValueError):
            best_response_step(inst, np.array([-1.0, 0.0]))


class TestRunPowerGame:
    def test_zero_players_trivially_converged(self):
        inst = PowerGameInstance(
            gains=np.zeros((0, 0)),
            targets=np.zeros(0),
            noise_w=np.zeros(0),
            p_max_w=1.0,
        )
        trace = run_power_game(inst)
        assert trace.converged
        assert trace.iterations == 0

    def test_feasible_instance_meets_targets(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 20:
            inst = _random_instance(rng, 4)
            sol = solve_min_power(inst)
            if not sol.feasible:
                continue
            done += 1
            trace = run_power_game(inst, max_iters=5000, tol=1e-14)
            assert trace.converged
            assert np.all(inst.sinr(trace.final) >= inst.targets * (1 - 1e-6))

    def test_infeasible_instance_reports_nonconvergence(self):
        # spectral radius > 1 by construction: strong symmetric cross gains
        inst = PowerGameInstance(
            gains=np.array([[1.0, 0.9], [0.9, 1.0]]),
            targets=np.array([2.0, 2.0]),
            noise_w=np.array([0.5, 0.5]),
            p_max_w=50.0,
        )
        sol = solve_min_power(inst)
        assert not sol.feasible
        assert sol.spectral_radius > 1.0
        trace = run_power_game(inst, max_iters=2000, tol=1e-12)
        assert not trace.converged

    def test_iterates_stay_in_bounds(self):
        rng = np.random.default_rng(11)
        inst = _random_instance(rng, 5, cross_scale=0.3, p_max=2.0)
        trace = run_power_game(inst, max_iters=500)
        for p in trace.iterates:
            assert np.all(p >= 0.0)
            assert np.all(p <= inst.p_max_w + 1e-15)

    def test_monotone_from_zero_on_feasible_instance(self):
        rng = np.random.default_rng(13)
        done = 0
        while done < 10:
            inst = _random_instance(rng, 3)
            sol = solve_min_power(inst)
            if not sol.feasible:
                continue
            done += 1
            trace = run_power_game(inst, max_iters=5000, tol=1e-14)
            for a, b in zip(trace.iterates, trace.iterates[1:]):
                assert np.all(b >= a - 1e-15)
            np.testing.assert_allclose(trace.final, sol.powers, rtol=1e-6)

    def test_lowering_a_target_never_raises_minimal_powers(self):
        rng = np.random.default_rng(17)
        done = 0
        while done < 10:
            inst = _random_instance(rng, 3)
            sol = solve_min_power(inst)
            if not sol.feasible:
                continue
            done += 1
            lowered = PowerGameInstance(
                gains=inst.gains.copy(),
                targets=inst.targets * np.array([0.5, 1.0, 1.0]),
                noise_w=inst.noise_w.copy(),
                p_max_w=inst.p_max_w,
            )
            sol_low = solve_min_power(lowered)
            assert sol_low.feasible
            assert np.all(sol_low.powers <= sol.powers + 1e-12)

    def test_interior_fixed_point_sinr_equals_target(self):
        inst = _two_player_symmetric()
        trace = run_power_game(inst, max_iters=5000, tol=1e-15)
        np.testing.assert_allclose(inst.sinr(trace.final), inst.targets, rtol=1e-9)


class TestFromRadio:
    def test_builds_co_channel_game(self):
        params = radio.RadioParams().validate()
        topo = radio.generate_topology(params, m=3, n=4, rng_seed=5)
        gains = radio.draw_gains(topo, params, rng_seed=6)
        inst = power_game_from_radio(topo, gains, params, rb=1, pair_indices=[0, 2, 3])
        assert inst.n_players == 3
        assert inst.p_max_w == pytest.approx(params.p_d2d_w)
        # direct gains on the diagonal
        assert inst.gains[0, 0] == pytest.approx(gains.get(("dtx", 0), ("drx", 0), 1))
        assert inst.gains[1, 0] == pytest.approx(gains.get(("dtx", 0), ("drx", 2), 1))
        assert np.all(inst.noise_w > radio.effective_noise_w(params))
