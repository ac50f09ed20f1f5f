"""Instance norm, layer norm, and the conditional blended normalization."""

import numpy as np
import pytest

from divergan import tensor as T
from divergan.norm import (CadaIlnParams, build_cadailn, cadailn, clamp_rho,
                           instance_norm, layer_norm)
from divergan.tensor import Adam, ParamStore, Tensor


def cadailn_oracle(x, s, w1, b1, w2, b2, rho, eps=1e-5):
    """Straight-line reference: project cues, blend IN/LN, scale and shift."""
    gamma = s @ w1 + b1
    beta = s @ w2 + b2
    mu_i = x.mean(axis=(1, 2), keepdims=True)
    var_i = ((x - mu_i) ** 2).mean(axis=(1, 2), keepdims=True)
    a_i = (x - mu_i) / np.sqrt(var_i + eps)
    mu_l = x.mean(axis=(1, 2, 3), keepdims=True)
    var_l = ((x - mu_l) ** 2).mean(axis=(1, 2, 3), keepdims=True)
    a_l = (x - mu_l) / np.sqrt(var_l + eps)
    f_hat = rho * a_i + (1.0 - rho) * a_l
    return gamma[:, None, None, :] * f_hat + beta[:, None, None, :]


@pytest.fixture
def params():
    store = ParamStore()
    p = build_cadailn(channels=2, sent_dim=3, store=store,
                      rng=np.random.default_rng(0), prefix="norm")
    return p, store


class TestInstanceNorm:
    def test_standardized_input_fixed_point(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 4, 4, 2))
        x = (x - x.mean(axis=(1, 2), keepdims=True)) / x.std(
            axis=(1, 2), keepdims=True)
        out = instance_norm(Tensor(x)).data
        np.testing.assert_allclose(out, x, atol=1e-4)

    def test_degenerate_single_pixel(self):
        out = instance_norm(Tensor(np.full((2, 1, 1, 3), 7.0)))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_hand_mean_variance(self):
        # mean 2.5, biased variance 1.25
        x = Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2, 1))
        out = instance_norm(x).data.ravel()
        np.testing.assert_allclose(
            out, [-1.3416, -0.4472, 0.4472, 1.3416], atol=1e-3)


class TestLayerNorm:
    def test_single_channel_equals_instance_norm(self):
        x = Tensor(np.random.default_rng(2).normal(size=(2, 3, 3, 1)))
        np.testing.assert_array_equal(layer_norm(x).data,
                                      instance_norm(x).data)

    def test_constant_map_zeros(self):
        out = layer_norm(Tensor(np.full((1, 2, 2, 3), 5.0)))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_two_point_standardization(self):
        out = layer_norm(Tensor(np.array([2.0, 4.0]).reshape(1, 1, 1, 2)))
        np.testing.assert_allclose(out.data.ravel(), [-1.0, 1.0], atol=1e-4)


class TestCadaIln:
    def test_zero_sentence_with_bias_init_is_identity_affine(self, params):
        p, _ = params
        x = Tensor(np.random.default_rng(3).normal(size=(2, 3, 3, 2)))
        s = Tensor(np.zeros((2, 3)))
        out = cadailn(x, s, p).data
        rho = p.rho.data
        want = (rho * instance_norm(x).data
                + (1 - rho) * layer_norm(x).data)
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_rho_one_is_pure_instance_path(self, params):
        p, _ = params
        p.rho.data[:] = 1.0
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(2, 3, 3, 2)))
        s = Tensor(rng.normal(size=(2, 3)))
        gamma = s.data @ p.w1.data + p.b1.data
        beta = s.data @ p.w2.data + p.b2.data
        want = (gamma[:, None, None, :] * instance_norm(x).data
                + beta[:, None, None, :])
        np.testing.assert_array_equal(cadailn(x, s, p).data, want)

    def test_matches_oracle_rho_half(self, params):
        p, _ = params
        rng = np.random.default_rng(5)
        x = rng.normal(size=(1, 2, 2, 2))
        s = rng.normal(size=(1, 3))
        out = cadailn(Tensor(x), Tensor(s), p).data
        want = cadailn_oracle(x, s, p.w1.data, p.b1.data, p.w2.data,
                              p.b2.data, p.rho.data)
        np.testing.assert_allclose(out, want, atol=1e-10)

    def test_instance_path_zero_mean_per_channel(self, params):
        p, _ = params
        p.rho.data[:] = 1.0
        p.w1.data[:] = 0.0
        p.w2.data[:] = 0.0
        rng = np.random.default_rng(6)
        out = cadailn(Tensor(rng.normal(size=(2, 4, 4, 2))),
                      Tensor(np.zeros((2, 3))), p).data
        np.testing.assert_allclose(out.mean(axis=(1, 2)), 0.0, atol=1e-5)

    def test_spatial_permutation_equivariance(self, params):
        p, _ = params
        p.rho.data[:] = 1.0
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 2, 3, 2))
        s = rng.normal(size=(1, 3))
        out = cadailn(Tensor(x), Tensor(s), p).data
        perm = rng.permutation(6)
        xp = x.reshape(1, 6, 1, 2)[:, perm].reshape(1, 2, 3, 2)
        outp = cadailn(Tensor(xp), Tensor(s), p).data
        np.testing.assert_allclose(
            outp, out.reshape(1, 6, 1, 2)[:, perm].reshape(1, 2, 3, 2),
            atol=1e-12)

    def test_rho_clamped_after_random_steps(self, params):
        p, store = params
        opt = Adam(store, lr=0.05)
        opt.post_step_hooks.append(lambda: clamp_rho(store))
        rng = np.random.default_rng(8)
        for _ in range(1000):
            for param in store:
                param.tensor.grad = rng.normal(size=param.tensor.data.shape)
            opt.step()
            assert p.rho.data.min() >= 0.0
            assert p.rho.data.max() <= 1.0
            opt.zero_grad()

    @pytest.mark.parametrize("which", ["x", "s", "w1", "w2", "rho"])
    def test_gradients_away_from_clamp(self, params, which):
        p, _ = params
        p.rho.data[:] = 0.4
        rng = np.random.default_rng(9)
        x0 = rng.normal(size=(1, 2, 2, 2))
        s0 = rng.normal(size=(1, 3))

        def loss(leaf):
            trial = CadaIlnParams(
                w1=leaf if which == "w1" else Tensor(p.w1.data),
                b1=Tensor(p.b1.data),
                w2=leaf if which == "w2" else Tensor(p.w2.data),
                b2=Tensor(p.b2.data),
                rho=leaf if which == "rho" else Tensor(p.rho.data))
            x = leaf if which == "x" else Tensor(x0)
            s = leaf if which == "s" else Tensor(s0)
            out = cadailn(x, s, trial)
            return T.sum_(T.mul(out, out))

        seed = {"x": x0, "s": s0, "w1": p.w1.data, "w2": p.w2.data,
                "rho": p.rho.data}[which]
        rep = T.finite_difference_check(loss, Tensor(np.array(seed)),
                                        eps=1e-6, tol=1e-4)
        assert rep.passed, f"{which}: {rep.max_rel_error}"
