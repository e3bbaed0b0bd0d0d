import numpy as np
import pytest

from trainseq.criteria import Criterion, error_covariance, objective
from trainseq.errors import InvalidArgumentError
from trainseq.mm_core import (
    SolveOptions,
    StepEngine,
    compute_A,
    compute_B,
    compute_V,
    first_surrogate,
    lambda_bound,
    linear_surrogate,
    mm_state,
    mm_update,
    project_unimodular,
    solve,
    unified_surrogate,
)
from trainseq.model import ChannelPrior, NoiseModel, Sequence, lift

from conftest import (
    random_complex,
    random_psd,
    random_unimodular,
    siso_reference_scenario,
    small_scenario,
)


def scalar_problem():
    prior = ChannelPrior(h0=[0.0], R0=[[1.0]])
    noise = NoiseModel(W=[[1.0]])
    S = np.array([[1.0 + 0j]])
    return S, prior, noise


class TestComputeA:
    def test_scalar(self):
        S, prior, noise = scalar_problem()
        assert compute_A(S, prior, noise)[0, 0] == pytest.approx(0.5)

    def test_zero_sequence(self, rng):
        prior = ChannelPrior(h0=np.zeros(4), R0=random_psd(rng, 4))
        noise = NoiseModel(W=random_psd(rng, 6, ridge=0.4))
        assert np.allclose(compute_A(np.zeros((6, 4)), prior, noise), 0.0)

    def test_solve_residual(self, rng):
        for _ in range(5):
            S = random_complex(rng, (7, 4))
            prior = ChannelPrior(h0=np.zeros(4), R0=random_psd(rng, 4))
            noise = NoiseModel(W=random_psd(rng, 7, ridge=0.4))
            A = compute_A(S, prior, noise)
            SR = S @ prior.R0
            P = SR @ S.conj().T + noise.W
            res = np.linalg.norm(P @ A - SR) / max(np.linalg.norm(SR), 1.0)
            assert res <= 1e-10


class TestComputeV:
    def test_mmse_is_identity(self, rng):
        prior = ChannelPrior(h0=np.zeros(3), R0=random_psd(rng, 3))
        noise = NoiseModel(W=random_psd(rng, 5, ridge=0.4))
        S = random_complex(rng, (5, 3))
        assert np.array_equal(
            compute_V(Criterion.MMSE, S, prior, noise), np.eye(3)
        )

    def test_cmi_scalar_inverse(self):
        S, prior, noise = scalar_problem()
        V = compute_V(Criterion.CMI, S, prior, noise)
        assert V[0, 0] == pytest.approx(2.0)

    def test_cmi_inverse_residual(self, rng):
        S = random_complex(rng, (7, 4))
        prior = ChannelPrior(h0=np.zeros(4), R0=random_psd(rng, 4))
        noise = NoiseModel(W=random_psd(rng, 7, ridge=0.4))
        V = compute_V(Criterion.CMI, S, prior, noise)
        R = error_covariance(S, prior, noise).R
        assert np.max(np.abs(R @ V - np.eye(4))) <= 1e-8


class TestLambdaBound:
    def test_unit_norms(self):
        assert lambda_bound(np.eye(3), np.eye(4), np.eye(4)) == pytest.approx(1.0)

    def test_diagonal_column_sums(self):
        R0 = np.diag([1.0, 2.0])
        A = np.diag([np.sqrt(3.0), 1.0])
        assert lambda_bound(R0, A, np.eye(2)) == pytest.approx(6.0)

    def test_dominates_exact_eigenvalue(self, rng):
        for _ in range(20):
            n, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            R0 = random_psd(rng, n)
            A = random_complex(rng, (m, n))
            V = random_psd(rng, n)
            lam = lambda_bound(R0, A, V)
            Z = A @ V @ A.conj().T
            exact = float(np.max(np.linalg.eigvalsh(np.kron(R0.T, Z))))
            assert lam >= exact * (1 - 1e-12)

    def test_floor_when_degenerate(self):
        assert lambda_bound(np.zeros((2, 2)), np.zeros((3, 2)), np.eye(2)) == 1e-300


class TestComputeB:
    def test_scalar_hand_value(self):
        S, prior, noise = scalar_problem()
        A = compute_A(S, prior, noise)
        V = np.eye(1)
        lam = lambda_bound(prior.R0, A, V)
        assert lam == pytest.approx(0.25)
        B = compute_B(lam, S, A, V, prior)
        assert B[0, 0] == pytest.approx(0.5)

    def test_zero_center(self, rng):
        prior = ChannelPrior(h0=np.zeros(3), R0=random_psd(rng, 3))
        B = compute_B(0.7, np.zeros((5, 3)), np.zeros((5, 3)), np.eye(3), prior)
        assert np.allclose(B, 0.0)


class TestProjectUnimodular:
    def test_hand_values(self):
        C = np.array([[2.0], [-3.0j]])
        P = project_unimodular(C, 1.0)
        assert np.allclose(P, [[1.0], [-1.0j]], atol=1e-15)

    def test_zero_entries_take_zero_phase(self):
        P = project_unimodular(np.zeros((2, 2)), 0.7)
        assert np.array_equal(P, np.full((2, 2), 0.7 + 0j))
        # negative real zero must not flip to the opposite phase
        C = np.array([[complex(-0.0, 0.0)]])
        assert project_unimodular(C, 1.0)[0, 0] == 1.0 + 0j

    def test_rejects_nonpositive_magnitude(self):
        with pytest.raises(InvalidArgumentError):
            project_unimodular(np.ones((1, 1)), 0.0)

    def test_minimizer_against_random_competitors(self, rng):
        for _ in range(100):
            C = random_complex(rng, (4, 2))
            mag = 0.8
            best = project_unimodular(C, mag)
            competitor = mag * np.exp(2j * np.pi * rng.random((4, 2)))
            assert (
                np.linalg.norm(competitor - C)
                >= np.linalg.norm(best - C) - 1e-12
            )


class TestMmUpdate:
    def test_deterministic_bitwise(self, rng):
        scenario = small_scenario(rng)
        U = random_unimodular(scenario.config, rng).U
        a = mm_update(U, scenario, Criterion.MMSE)
        b = mm_update(U, scenario, Criterion.MMSE)
        assert np.array_equal(a, b)

    def test_matches_composed_ops(self, rng):
        scenario = small_scenario(rng)
        cfg = scenario.config
        U = random_unimodular(cfg, rng).U
        for criterion in Criterion:
            state = mm_state(U, scenario, criterion)
            from trainseq.model import adjoint_sum

            composed = project_unimodular(
                adjoint_sum(state.B, cfg), cfg.unimodular_magnitude
            )
            fused = mm_update(U, scenario, criterion)
            assert np.max(np.abs(fused - composed)) <= 1e-10

    def test_fixed_point_idempotence(self, rng):
        scenario = small_scenario(rng, N=5, Nt=1, Nr=1, K=2)
        engine = StepEngine(scenario, Criterion.MMSE)
        U = random_unimodular(scenario.config, rng).U
        for _ in range(30_000):
            U_next = engine.update(U)
            if np.array_equal(U_next, U):
                break
            U = U_next
        else:
            pytest.fail("no exact fixed point reached")
        moved = np.linalg.norm(mm_update(U, scenario, Criterion.MMSE) - U)
        assert moved <= 1e-12

    def test_monotone_over_first_iterations(self, siso_scenario):
        U = random_unimodular(
            siso_scenario.config, np.random.default_rng(3)
        ).U
        engine = StepEngine(siso_scenario, Criterion.MMSE)
        values = []
        for _ in range(10):
            U, f = engine.step(U)
            values.append(f)
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_preserves_feasibility(self, rng):
        scenario = small_scenario(rng)
        cfg = scenario.config
        U = random_unimodular(cfg, rng).U
        for criterion in Criterion:
            U_next = mm_update(U, scenario, criterion)
            Sequence(U=U_next).validate_unimodular(cfg)


class TestSolve:
    def test_huge_tolerance_one_iteration(self, rng):
        scenario = small_scenario(rng)
        init = random_unimodular(scenario.config, rng)
        _, trace = solve(scenario, Criterion.MMSE, init,
                         SolveOptions(tol=1e6, max_iters=50))
        assert trace.iterations == 1
        assert trace.termination == "tolerance"

    def test_iteration_cap_is_not_an_error(self, rng):
        scenario = small_scenario(rng)
        init = random_unimodular(scenario.config, rng)
        _, trace = solve(scenario, Criterion.MMSE, init,
                         SolveOptions(tol=1e-15, max_iters=3))
        assert trace.termination == "iteration-cap"
        assert trace.iterations == 3

    def test_siso_improves_on_random_init(self, siso_scenario):
        init = random_unimodular(siso_scenario.config, np.random.default_rng(5))
        seq, trace = solve(siso_scenario, Criterion.MMSE, init,
                           SolveOptions(tol=1e-6))
        assert trace.termination == "tolerance"
        assert trace.objectives[-1] <= trace.objectives[0]
        final = objective(
            Criterion.MMSE,
            lift(seq.U, siso_scenario.config.K, siso_scenario.config.Nr),
            siso_scenario.prior, siso_scenario.noise,
        )
        assert final == pytest.approx(trace.objectives[-1], rel=1e-8)

    def test_trace_monotone_both_criteria(self, rng):
        scenario = small_scenario(rng)
        init = random_unimodular(scenario.config, rng)
        for criterion in Criterion:
            _, trace = solve(scenario, criterion, init,
                             SolveOptions(tol=1e-9, max_iters=300))
            obj = np.asarray(trace.objectives)
            slack = 1e-10 * np.maximum(1.0, np.abs(obj[:-1]))
            diffs = np.diff(obj)
            if criterion is Criterion.MMSE:
                assert np.all(diffs <= slack)
            else:
                assert np.all(diffs >= -slack)

    def test_trace_bookkeeping(self, rng):
        scenario = small_scenario(rng)
        init = random_unimodular(scenario.config, rng)
        _, trace = solve(scenario, Criterion.MMSE, init,
                         SolveOptions(tol=1e-8, max_iters=100))
        assert len(trace.objectives) == trace.iterations + 1
        assert len(trace.step_norms) == trace.iterations
        assert trace.update_evals == trace.iterations
        assert trace.update_evals_at == list(range(trace.iterations + 1))

    def test_stationarity_after_tight_convergence(self, siso_scenario):
        init = random_unimodular(siso_scenario.config, np.random.default_rng(77))
        tol = 1e-8
        for criterion in Criterion:
            seq, trace = solve(
                siso_scenario, criterion, init,
                SolveOptions(tol=tol, max_iters=50_000, record_trace=False),
            )
            assert trace.termination == "tolerance"
            moved = np.linalg.norm(
                mm_update(seq.U, siso_scenario, criterion) - seq.U
            )
            assert moved <= 10 * tol

    def test_rejects_infeasible_init(self, rng):
        scenario = small_scenario(rng)
        bad = Sequence(U=np.ones((scenario.config.N, scenario.config.Nt)) * 2.0)
        with pytest.raises(InvalidArgumentError):
            solve(scenario, Criterion.MMSE, bad)


class TestSurrogates:
    def test_first_layer_tangency_and_domination(self, rng):
        scenario = small_scenario(rng)
        cfg = scenario.config
        for _ in range(100):
            Sc = lift(random_unimodular(cfg, rng).U, cfg.K, cfg.Nr)
            Sn = lift(random_unimodular(cfg, rng).U, cfg.K, cfg.Nr)
            for criterion in Criterion:
                f_center = objective(criterion, Sc, scenario.prior, scenario.noise)
                g_center = first_surrogate(Sc, Sc, criterion,
                                           scenario.prior, scenario.noise)
                assert g_center == pytest.approx(f_center, abs=1e-9, rel=1e-9)
                f_new = objective(criterion, Sn, scenario.prior, scenario.noise)
                g_new = first_surrogate(Sn, Sc, criterion,
                                        scenario.prior, scenario.noise)
                if criterion is Criterion.MMSE:
                    assert g_new >= f_new - 1e-9
                else:
                    assert g_new <= f_new + 1e-9

    def test_second_layer_tangency_and_domination(self, rng):
        scenario = small_scenario(rng)
        cfg = scenario.config
        for _ in range(100):
            Sc = lift(random_unimodular(cfg, rng).U, cfg.K, cfg.Nr)
            Sn = lift(random_unimodular(cfg, rng).U, cfg.K, cfg.Nr)
            for criterion in Criterion:
                g_center = unified_surrogate(Sc, Sc, criterion,
                                             scenario.prior, scenario.noise)
                h_center = linear_surrogate(Sc, Sc, criterion,
                                            scenario.prior, scenario.noise)
                assert h_center == pytest.approx(g_center, abs=1e-9, rel=1e-9)
                g_new = unified_surrogate(Sn, Sc, criterion,
                                          scenario.prior, scenario.noise)
                h_new = linear_surrogate(Sn, Sc, criterion,
                                         scenario.prior, scenario.noise)
                assert h_new >= g_new - 1e-9

    def test_state_lambda_dominates_probe(self, rng):
        # random-probe check of the curvature inequality at small sizes
        scenario = small_scenario(rng, N=4, Nt=1, Nr=1, K=2)
        U = random_unimodular(scenario.config, rng).U
        state = mm_state(U, scenario, Criterion.MMSE)
        Z = state.A @ state.V @ state.A.conj().T
        Kron = np.kron(scenario.prior.R0.T, Z)
        for _ in range(10):
            x = random_complex(rng, (Kron.shape[0],))
            assert np.linalg.norm(Kron @ x) <= state.lam * np.linalg.norm(x) * (
                1 + 1e-12
            )
