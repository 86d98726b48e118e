import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from motiondiff.schedule import (
    NoiseSchedule,
    make_schedule,
    q_sample,
    reconstruct_x0,
    reverse_step,
)


def t64(x):
    return torch.tensor(x, dtype=torch.float64)


class TestMakeSchedule:
    def test_standard_linear_endpoints(self):
        sched = make_schedule(1000, 1e-4, 0.02)
        assert sched.T == 1000
        assert float(sched.sigma[0]) == pytest.approx(1e-4, abs=1e-12)
        assert float(sched.sigma[-1]) == pytest.approx(0.02, abs=1e-12)

    def test_single_step_product(self):
        sched = make_schedule(1, 0.5, 0.5)
        assert float(sched.alpha_bar[0]) == pytest.approx(0.5, abs=1e-12)

    def test_running_product(self):
        sched = NoiseSchedule.from_sigmas([0.1, 0.1, 0.1])
        assert float(sched.alpha_bar[2]) == pytest.approx(0.9**3, abs=1e-12)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            make_schedule(0)
        with pytest.raises(ValueError):
            make_schedule(-5)
        with pytest.raises(ValueError):
            make_schedule(10, 0.0, 0.02)
        with pytest.raises(ValueError):
            make_schedule(10, 1e-4, 1.0)
        with pytest.raises(ValueError):
            make_schedule(10, 0.02, 0.01)
        with pytest.raises(ValueError):
            NoiseSchedule.from_sigmas([])

    def test_monotonic_alpha_bar(self):
        for T in (1, 10, 200, 1000):
            sched = make_schedule(T)
            ab = sched.alpha_bar.numpy()
            assert (np.diff(ab) < 0).all() or T == 1
            assert 0.0 < ab[-1] <= ab[0] < 1.0

    def test_sqrt_identity(self):
        sched = make_schedule(200, 1e-4, 0.1)
        s = sched.sqrt_alpha_bar**2 + sched.sqrt_one_minus_alpha_bar**2
        assert float((s - 1.0).abs().max()) < 1e-6


class TestQSample:
    def test_zero_noise(self):
        sched = make_schedule(10)
        x0 = t64([1.0, -2.0, 3.0])
        out = q_sample(x0, 5, torch.zeros_like(x0), sched)
        expected = float(sched.sqrt_alpha_bar[4]) * x0
        assert torch.allclose(out, expected)

    def test_zero_signal(self):
        sched = make_schedule(10)
        e = t64([0.3, -0.7])
        out = q_sample(torch.zeros_like(e), 7, e, sched)
        assert torch.allclose(out, float(sched.sqrt_one_minus_alpha_bar[6]) * e)

    def test_hand_value(self):
        # alpha_bar = 0.64 so the coefficients are exactly 0.8 and 0.6
        sched = NoiseSchedule.from_sigmas([0.36])
        out = q_sample(t64(1.0), 1, t64(0.5), sched)
        assert float(out) == pytest.approx(0.8 * 1.0 + 0.6 * 0.5, abs=1e-12)

    def test_shape_and_range_errors(self):
        sched = make_schedule(10)
        with pytest.raises(ValueError):
            q_sample(torch.zeros(3), 1, torch.zeros(4), sched)
        with pytest.raises(ValueError):
            q_sample(torch.zeros(3), 0, torch.zeros(3), sched)
        with pytest.raises(ValueError):
            q_sample(torch.zeros(3), 11, torch.zeros(3), sched)


class TestReconstruct:
    def test_hand_value(self):
        sched = NoiseSchedule.from_sigmas([0.36])
        out = reconstruct_x0(t64(1.1), 1, t64(0.5), sched)
        assert float(out) == pytest.approx(1.0, abs=1e-12)

    def test_zero_eps(self):
        sched = make_schedule(10)
        x_t = t64([2.0, 4.0])
        out = reconstruct_x0(x_t, 3, torch.zeros_like(x_t), sched)
        assert torch.allclose(out, x_t / float(sched.sqrt_alpha_bar[2]))

    @pytest.mark.parametrize("T", [1, 10, 200, 1000])
    def test_roundtrip_identity_all_t(self, T):
        sched = make_schedule(T)
        gen = torch.Generator().manual_seed(T)
        x0 = torch.randn(T, 5, generator=gen, dtype=torch.float64)
        eps = torch.randn(T, 5, generator=gen, dtype=torch.float64)
        t = torch.arange(1, T + 1)
        rec = reconstruct_x0(q_sample(x0, t, eps, sched), t, eps, sched)
        assert float((rec - x0).abs().max()) < 1e-5


class TestReverseStep:
    def test_zero_inputs(self):
        sched = make_schedule(10)
        x = t64([1.0, 2.0])
        out = reverse_step(x, 5, torch.zeros_like(x), torch.zeros_like(x), sched)
        assert torch.allclose(out, x / (1.0 - float(sched.sigma[4])) ** 0.5)

    def test_hand_value(self):
        # sigma_2 = 0.19 and alpha_bar_2 = 0.64 -> sqrt(1-sigma)=0.9, sqrt(1-ab)=0.6
        sched = NoiseSchedule.from_sigmas([17.0 / 81.0, 0.19])
        assert float(sched.alpha_bar[1]) == pytest.approx(0.64, abs=1e-12)
        out = reverse_step(t64(1.0), 2, t64(0.6), t64(0.0), sched)
        assert float(out) == pytest.approx(0.9, abs=1e-12)

    def test_single_step_chain(self):
        sched = make_schedule(1, 0.5, 0.5)
        x1 = t64([0.3, -0.3])
        out = reverse_step(x1, 1, torch.zeros_like(x1), torch.zeros_like(x1), sched)
        assert torch.isfinite(out).all()

    def test_rejects_noise_at_final_step(self):
        sched = make_schedule(5)
        x = t64([1.0])
        with pytest.raises(ValueError):
            reverse_step(x, 1, torch.zeros_like(x), torch.ones_like(x), sched)

    def test_linearity_per_argument(self):
        sched = make_schedule(7)
        gen = torch.Generator().manual_seed(3)
        u = torch.randn(4, generator=gen, dtype=torch.float64)
        zero = torch.zeros_like(u)
        for a in (0.5, -2.0, 3.7):
            f_x = reverse_step(u, 3, zero, zero, sched)
            assert torch.allclose(reverse_step(a * u, 3, zero, zero, sched), a * f_x)
            f_e = reverse_step(zero, 3, u, zero, sched)
            assert torch.allclose(reverse_step(zero, 3, a * u, zero, sched), a * f_e)
            f_z = reverse_step(zero, 3, zero, u, sched)
            assert torch.allclose(reverse_step(zero, 3, zero, a * u, sched), a * f_z)


class TestForwardMarginal:
    @pytest.mark.parametrize("T", [1, 10, 200, 1000])
    def test_mean_and_variance(self, T):
        sched = make_schedule(T)
        gen = torch.Generator().manual_seed(99)
        n = 10_000
        x0 = t64(1.3)
        for t in sorted({1, max(1, T // 2), T}):
            eps = torch.randn(n, generator=gen, dtype=torch.float64)
            samples = q_sample(x0.expand(n), t, eps, sched)
            ab = float(sched.alpha_bar[t - 1])
            se = np.sqrt(1.0 - ab) / np.sqrt(n)
            assert abs(float(samples.mean()) - np.sqrt(ab) * 1.3) < 3.0 * se
            assert abs(float(samples.var(correction=1)) - (1.0 - ab)) < 0.05 * (1.0 - ab)


@settings(max_examples=25, deadline=None)
@given(
    T=st.integers(min_value=1, max_value=300),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_roundtrip_property(T, seed):
    sched = make_schedule(T, 1e-4, 0.05)
    gen = torch.Generator().manual_seed(seed)
    x0 = torch.randn(8, generator=gen, dtype=torch.float64)
    eps = torch.randn(8, generator=gen, dtype=torch.float64)
    t = int(torch.randint(1, T + 1, (1,), generator=gen))
    rec = reconstruct_x0(q_sample(x0, t, eps, sched), t, eps, sched)
    assert float((rec - x0).abs().max()) < 1e-5
