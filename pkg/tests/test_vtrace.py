"""Off-policy correction math against independent oracles.

The direct-summation oracle below recomputes v_s from the definition
(explicit products of truncated ratios) with no shared code with the
backward recursion in the package.
"""

import numpy as np
import pytest

from rlforge.core import ConfigError, NumericError, ShapeError, make_rng
from rlforge.nn.tape import Tensor, constant, log_softmax, select_last_axis
from rlforge.vtrace import VTraceConfig, compute_vtrace, policy_loss, value_loss


def direct_sum_targets(values, rewards, ratios, cfg):
    """v_s by explicit summation: v_s = V_s + sum_t gamma^(t-s) (prod c) delta_t."""
    n = len(rewards)
    rhos = np.minimum(cfg.rho_bar, ratios)
    cs = np.minimum(cfg.c_bar, ratios)
    targets = np.zeros(n)
    for s in range(n):
        total = values[s]
        for t in range(s, n):
            prod_c = 1.0
            for i in range(s, t):
                prod_c *= cs[i]
            delta = rhos[t] * (rewards[t] + cfg.gamma * values[t + 1] - values[t])
            total += cfg.gamma ** (t - s) * prod_c * delta
        targets[s] = total
    return targets


def random_segment(rng, n):
    values = rng.normal(size=n + 1)
    rewards = rng.normal(size=n)
    ratios = rng.uniform(0.0, 3.0, size=n)
    return values, rewards, ratios


class TestComputeVtrace:
    def test_worked_example(self):
        cfg = VTraceConfig(rho_bar=1.0, c_bar=1.0, gamma=0.9)
        res = compute_vtrace([1.0, 0.5, 0.0], [1.0, 2.0], [2.0, 0.5], cfg)
        assert res.targets[0] == pytest.approx(2.125, abs=1e-12)
        assert res.targets[1] == pytest.approx(1.25, abs=1e-12)
        assert res.pg_advantages[0] == pytest.approx(1.125, abs=1e-12)
        assert np.array_equal(res.truncated_rhos, [1.0, 0.5])

    def test_matches_direct_summation(self):
        rng = make_rng(101)
        for _ in range(200):
            n = int(rng.integers(1, 11))
            values, rewards, ratios = random_segment(rng, n)
            cfg = VTraceConfig(
                rho_bar=float(rng.uniform(1.0, 3.0)),
                c_bar=float(rng.uniform(0.0, 1.0)),
                gamma=float(rng.uniform(0.0, 1.0)),
            )
            res = compute_vtrace(values, rewards, ratios, cfg)
            oracle = direct_sum_targets(values, rewards, ratios, cfg)
            assert np.max(np.abs(res.targets - oracle)) < 1e-9

    def test_on_policy_reduces_to_n_step_return(self):
        rng = make_rng(102)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            values, rewards, _ = random_segment(rng, n)
            gamma = float(rng.uniform(0.0, 1.0))
            cfg = VTraceConfig(gamma=gamma)
            res = compute_vtrace(values, rewards, np.ones(n), cfg)
            for s in range(n):
                expected = gamma ** (n - s) * values[n]
                for t in range(s, n):
                    expected += gamma ** (t - s) * rewards[t]
                assert abs(res.targets[s] - expected) < 1e-9

    def test_truncation_reduces_target_variance(self):
        # with rho_bar = c_bar = 1, corrections shrink as ratios blow up
        cfg = VTraceConfig()
        res_wild = compute_vtrace([0.0, 0.0, 0.0], [1.0, 1.0], [100.0, 100.0], cfg)
        assert np.all(res_wild.truncated_rhos <= 1.0)
        assert np.all(res_wild.truncated_cs <= 1.0)

    def test_shape_errors(self):
        cfg = VTraceConfig()
        with pytest.raises(ShapeError):
            compute_vtrace([1.0, 2.0], [1.0, 1.0], [1.0, 1.0], cfg)
        with pytest.raises(ShapeError):
            compute_vtrace([1.0], [], [], cfg)

    def test_non_finite_rejected(self):
        cfg = VTraceConfig()
        with pytest.raises(NumericError):
            compute_vtrace([1.0, np.nan], [1.0], [1.0], cfg)
        with pytest.raises(NumericError):
            compute_vtrace([1.0, 1.0], [1.0], [-0.5], cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            VTraceConfig(rho_bar=0.5)
        with pytest.raises(ConfigError):
            VTraceConfig(c_bar=2.0, rho_bar=1.5)
        with pytest.raises(ConfigError):
            VTraceConfig(gamma=1.01)


class TestLossDirections:
    def test_linear_value_grad_worked_example(self):
        # V(x) = w * x with w=1, x=2, target v=5: dL/dw = -(5 - 2) * 2 = -6
        w = Tensor([[1.0]], requires_grad=True)
        x = constant([[2.0]])
        pred = (x @ w).reshape(1)
        loss = value_loss(np.array([5.0]), pred)
        loss.backward()
        assert w.grad[0, 0] == pytest.approx(-6.0, abs=1e-12)

    def test_policy_grad_tabular_worked_example(self):
        # uniform logits over 2 actions, advantage +1 on action 0:
        # d(-adv*logpi)/dlogits = -adv * (onehot - pi) = [-0.5, +0.5]
        logits = Tensor([[0.0, 0.0]], requires_grad=True)
        logp = select_last_axis(log_softmax(logits), np.array([0]))
        loss = policy_loss(np.array([1.0]), logp)
        loss.backward()
        assert logits.grad[0, 0] == pytest.approx(-0.5, abs=1e-12)
        assert logits.grad[0, 1] == pytest.approx(0.5, abs=1e-12)

    def test_entropy_term_pushes_toward_uniform(self):
        from rlforge.nn.tape import mul, reduce_sum, softmax

        logits = Tensor([[2.0, 0.0]], requires_grad=True)
        probs_before = np.exp(log_softmax(logits).data)
        logp = select_last_axis(log_softmax(logits), np.array([0]))
        p = softmax(logits)
        entropy = -1.0 * reduce_sum(mul(p, log_softmax(logits)), axis=-1)
        loss = policy_loss(np.array([0.0]), logp, entropies=entropy, entropy_cost=1.0)
        loss.backward()
        # gradient descent on this loss should increase entropy: check the sign
        step = logits.data - 0.1 * logits.grad
        e = np.exp(step - step.max())
        probs_after = e / e.sum()
        assert abs(probs_after[0, 0] - 0.5) < abs(probs_before[0, 0] - 0.5)


class TestTabularConvergence:
    def test_converges_to_truncated_policy_value(self):
        """Expected 1-step v-trace operator on a random 5-state MDP converges to
        V of the rho_bar-truncated policy, computed by linear solve."""
        rng = make_rng(103)
        S, A = 5, 3
        gamma = 0.9
        P = rng.uniform(0.1, 1.0, size=(S, A, S))
        P /= P.sum(axis=2, keepdims=True)
        R = rng.normal(size=(S, A))
        mu = rng.uniform(0.1, 1.0, size=(S, A))
        mu /= mu.sum(axis=1, keepdims=True)
        pi = rng.uniform(0.1, 1.0, size=(S, A))
        pi /= pi.sum(axis=1, keepdims=True)
        cfg = VTraceConfig(rho_bar=1.0, c_bar=1.0, gamma=gamma)

        # truncated policy pi_bar(a|x) proportional to min(rho_bar*mu, pi)
        w = np.minimum(cfg.rho_bar * mu, pi)
        pi_bar = w / w.sum(axis=1, keepdims=True)
        P_bar = np.einsum("sa,sax->sx", pi_bar, P)
        r_bar = np.einsum("sa,sa->s", pi_bar, R)
        v_true = np.linalg.solve(np.eye(S) - gamma * P_bar, r_bar)

        V = np.zeros(S)
        for _ in range(600):
            V_new = np.zeros(S)
            for s in range(S):
                total = 0.0
                for a in range(A):
                    for s2 in range(S):
                        res = compute_vtrace([V[s], V[s2]], [R[s, a]], [pi[s, a] / mu[s, a]], cfg)
                        total += mu[s, a] * P[s, a, s2] * res.targets[0]
                V_new[s] = total
            V = V_new
        assert np.max(np.abs(V - v_true)) < 1e-3
