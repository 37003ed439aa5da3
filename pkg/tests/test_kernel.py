import numpy as np
import pytest

from biased_voter.kernel import (Kernel, char_fn, fold_to_torus, make_nn_kernel,
                                 make_power_kernel, verify_assumption)


def weight_of(kernel, disp):
    for x, w in kernel.support:
        if x == disp:
            return w
    return 0.0


class TestNearestNeighbor:
    def test_d1(self):
        k = make_nn_kernel(1)
        assert weight_of(k, (1,)) == 0.5
        assert weight_of(k, (-1,)) == 0.5
        assert np.allclose(k.dmatrix, [[0.5]])

    def test_d2(self):
        k = make_nn_kernel(2)
        for disp in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            assert weight_of(k, disp) == 0.25
        assert np.allclose(k.dmatrix, np.eye(2) / 4)

    def test_d3(self):
        k = make_nn_kernel(3)
        assert len(k.support) == 6
        assert np.allclose(k.weights, 1 / 6)
        assert np.allclose(k.dmatrix, np.eye(3) / 6)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            make_nn_kernel(4)
        with pytest.raises(ValueError):
            make_nn_kernel(0)


class TestPowerKernel:
    def test_single_shell_degenerates(self):
        k = make_power_kernel(1.0, 1)
        assert weight_of(k, (1,)) == pytest.approx(0.5, abs=1e-15)
        assert weight_of(k, (-1,)) == pytest.approx(0.5, abs=1e-15)

    def test_weights_decay_and_normalize(self):
        k = make_power_kernel(1.5, 10)
        assert abs(k.weights.sum() - 1.0) < 1e-12
        w1 = weight_of(k, (1,))
        w2 = weight_of(k, (2,))
        assert w2 == pytest.approx(w1 * 2.0 ** -2.5, rel=1e-12)

    def test_tail_fit_residual(self):
        # oracle: direct summation of 1 - sum p(x) cos(kx) on a fresh grid,
        # then compare against the fitted c |k|^alpha pointwise
        alpha, cutoff = 1.0, 1000
        k = make_power_kernel(alpha, cutoff)
        x = np.arange(1, cutoff + 1)
        w = x.astype(float) ** (-(1 + alpha))
        w = w / (2 * w.sum())
        for kk in np.linspace(0.01, 0.1, 23):
            one_minus = 2 * np.sum(w * (1 - np.cos(kk * x)))
            fit = k.tail_constant * kk ** alpha
            assert abs(fit - one_minus) / one_minus < 0.05

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            make_power_kernel(2.0, 10)
        with pytest.raises(ValueError):
            make_power_kernel(0.0, 10)


class TestCharFn:
    def test_at_zero(self):
        for k in (make_nn_kernel(1), make_nn_kernel(2), make_power_kernel(1.2, 7)):
            assert char_fn(k, np.zeros(k.dim)) == pytest.approx(1.0, abs=1e-15)

    def test_nn_d1_at_pi(self):
        # pi is not a multiple of 2*pi, so the value must differ from 1;
        # the explicit formula gives cos(pi) = -1
        assert char_fn(make_nn_kernel(1), [np.pi]) == pytest.approx(-1.0, abs=1e-12)

    def test_nn_d2_cancellation(self):
        assert char_fn(make_nn_kernel(2), [np.pi / 2, np.pi / 2]) == pytest.approx(0.0, abs=1e-12)

    def test_bounded_on_grid(self):
        k = make_power_kernel(0.8, 50)
        for kk in np.linspace(-3, 3, 61):
            assert -1.0 - 1e-12 <= char_fn(k, [kk]) <= 1.0 + 1e-12


class TestVerifyAssumption:
    def test_nn_d1_small_k_residual(self):
        k = make_nn_kernel(1)
        report = verify_assumption(k, [[0.1]])
        assert report.max_residual < 1e-2
        assert report.aperiodic_ok

    def test_nn_residual_vanishes_quadratically(self):
        k = make_nn_kernel(1)
        residuals = [verify_assumption(k, [[eps]]).max_residual for eps in (0.2, 0.1, 0.05)]
        assert residuals[0] > residuals[1] > residuals[2]

    def test_nn_d2_aperiodic(self):
        k = make_nn_kernel(2)
        grid = [[a, b] for a in (0.3, 1.0, np.pi) for b in (0.2, 2.0, np.pi)]
        assert verify_assumption(k, grid).aperiodic_ok

    def test_period_two_kernel_flagged(self):
        k = Kernel(dim=1, displacements=[[2], [-2]], weights=[0.5, 0.5],
                   alpha=2.0, dmatrix=[[2.0]])
        report = verify_assumption(k, [[np.pi]])
        assert not report.aperiodic_ok


class TestFolding:
    def test_side_two_merges_neighbors(self):
        tk = fold_to_torus(make_nn_kernel(1), 2)
        assert tk.folded == {(1,): pytest.approx(1.0)}

    def test_side_four_splits(self):
        tk = fold_to_torus(make_nn_kernel(1), 4)
        assert tk.folded[(1,)] == pytest.approx(0.5)
        assert tk.folded[(3,)] == pytest.approx(0.5)

    def test_power_kernel_mass_conserved(self):
        tk = fold_to_torus(make_power_kernel(1.0, 5), 4)
        assert abs(sum(tk.folded.values()) - 1.0) < 1e-12

    def test_symmetry_on_even_torus(self):
        tk = fold_to_torus(make_power_kernel(1.3, 7), 6)
        for (x,), w in tk.folded.items():
            assert tk.folded.get(((-x) % 6,)) == pytest.approx(w)

    def test_small_side_rejected(self):
        with pytest.raises(ValueError):
            fold_to_torus(make_nn_kernel(1), 1)


class TestKernelInvariants:
    def test_zero_mass_rejected(self):
        with pytest.raises(ValueError):
            Kernel(dim=1, displacements=[[0], [1], [-1]],
                   weights=[0.2, 0.4, 0.4], alpha=2.0, dmatrix=[[0.4]])

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            Kernel(dim=1, displacements=[[1], [-1]], weights=[0.7, 0.3],
                   alpha=2.0, dmatrix=[[0.5]])

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            Kernel(dim=1, displacements=[[1], [-1]], weights=[0.5, 0.6],
                   alpha=2.0, dmatrix=[[0.5]])

    def test_dmatrix_must_be_positive_definite(self):
        with pytest.raises(ValueError):
            Kernel(dim=2, displacements=[[1, 0], [-1, 0], [0, 1], [0, -1]],
                   weights=[0.25] * 4, alpha=2.0,
                   dmatrix=[[0.25, 0.5], [0.5, 0.25]])
