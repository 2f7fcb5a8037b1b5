"""Unit tests for the state space memory layer."""

import numpy as np
import pytest
from scipy import signal

from ssmi_lab.core.errors import ContractError, DimensionError, StabilityError
from ssmi_lab.core.numerics import Tensor, gradcheck, mul, tensor_sum
from ssmi_lab.core.ssm import (
    ResolventMethod,
    SsmParams,
    SsmState,
    condition_on_visual,
    convolve_kernel,
    enforce_stability,
    estimate_spectral_radius,
    feedthrough,
    impulse_response,
    init_stable,
    prepend_visual_token,
    resolvent_apply,
    resolvent_taps,
    scan,
    spectral_radius,
)
from tests.conftest import random_ssm


def scalar_system(a: float, b: float, c: float, d: float) -> SsmParams:
    return SsmParams.from_arrays(
        {
            "A": np.array([[a]]),
            "B": np.array([[b]]),
            "C": np.array([[c]]),
            "D": np.array([[d]]),
            "W_v": np.zeros((1, 1)),
        }
    )


@pytest.mark.unit
def test_scan_hand_unrolled_scalar():
    params = scalar_system(0.5, 1.0, 1.0, 0.0)

    Y = scan(params, Tensor([[1.0], [0.0], [0.0]]))

    np.testing.assert_allclose(Y.data[:, 0], [0.0, 1.0, 0.5], rtol=0, atol=1e-15)


@pytest.mark.unit
def test_scan_zero_input_gives_zero_output(rng):
    params = random_ssm(rng, 3, 2)

    np.testing.assert_array_equal(scan(params, Tensor(np.zeros((5, 2)))).data, 0.0)


@pytest.mark.unit
def test_scan_matches_scipy_dlsim(rng):
    params = random_ssm(rng, 3, 2)
    H = rng.normal(size=(12, 2))
    system = (params.A.data, params.B.data, params.C.data, params.D.data, 1)

    _, expected, _ = signal.dlsim(system, H)

    np.testing.assert_allclose(scan(params, Tensor(H)).data, expected, rtol=0, atol=1e-10)


@pytest.mark.unit
def test_single_steps_match_scan(rng):
    params = random_ssm(rng, 2, 3)
    H = rng.normal(size=(6, 3))
    state = SsmState.zeros(params.n)
    rows = []
    for h in H:
        y, state = state.step(params, h)
        rows.append(y)

    np.testing.assert_allclose(np.stack(rows), scan(params, Tensor(H)).data, rtol=0, atol=1e-12)


@pytest.mark.unit
def test_scan_is_linear(rng):
    params = random_ssm(rng, 3, 2)
    H1, H2 = rng.normal(size=(8, 2)), rng.normal(size=(8, 2))

    combined = scan(params, Tensor(2.0 * H1 - 0.5 * H2)).data
    separate = 2.0 * scan(params, Tensor(H1)).data - 0.5 * scan(params, Tensor(H2)).data

    np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-12)


@pytest.mark.unit
def test_scan_is_causal(rng):
    params = random_ssm(rng, 3, 2)
    H = rng.normal(size=(8, 2))
    before = scan(params, Tensor(H)).data
    H[5] += 10.0

    after = scan(params, Tensor(H)).data

    np.testing.assert_array_equal(after[:5], before[:5])
    assert not np.allclose(after[5:], before[5:])


@pytest.mark.unit
@pytest.mark.parametrize("radius", [0.5, 0.9, 0.95])
def test_scan_output_stays_within_the_stability_bound(radius):
    rng = np.random.default_rng(int(radius * 100))
    params = random_ssm(rng, 4, 3, radius=radius)
    noise = rng.uniform(-1.0, 1.0, size=(5000, 3))
    noise /= np.maximum(1.0, np.linalg.norm(noise, axis=1, keepdims=True))
    steady = np.tile(rng.normal(size=3), (5000, 1))
    steady /= np.linalg.norm(steady[0])
    H = np.vstack([noise, steady])

    Y = scan(params, Tensor(H)).data

    # symmetric A, so ||A^k||_2 = radius^k
    spectral = {k: np.linalg.norm(getattr(params, k).data, 2) for k in ("B", "C", "D")}
    bound = spectral["D"] + spectral["C"] * spectral["B"] / (1.0 - radius)
    assert H.shape == (10_000, 3)
    assert np.abs(H).max() <= 1.0
    assert np.linalg.norm(Y, axis=1).max() <= bound * (1.0 + 1e-12)


@pytest.mark.unit
def test_scan_rejects_width_mismatch(rng):
    with pytest.raises(DimensionError):
        scan(random_ssm(rng, 2, 3), Tensor(np.zeros((4, 2))))


@pytest.mark.unit
def test_scan_gradients_match_finite_differences(rng):
    params = random_ssm(rng, 3, 2)
    for tensor in params.tensors().values():
        tensor.requires_grad = True
    H = Tensor(rng.normal(size=(6, 2)), requires_grad=True, name="H")
    weights = Tensor(rng.normal(size=(6, 2)))

    def loss():
        return tensor_sum(mul(scan(params, H), weights))

    errors = gradcheck(loss, [H, params.A, params.B, params.C, params.D])

    assert max(errors.values()) < 1e-6


@pytest.mark.unit
def test_nilpotent_impulse_response(rng):
    params = random_ssm(rng, 2, 2)
    params.A.data = np.zeros((2, 2))

    G = impulse_response(params, 4)

    np.testing.assert_array_equal(G[0].data, params.D.data)
    np.testing.assert_allclose(G[1].data, params.C.data @ params.B.data)
    np.testing.assert_array_equal(G[2].data, 0.0)
    np.testing.assert_array_equal(G[3].data, 0.0)


@pytest.mark.unit
def test_impulse_response_needs_taps(rng):
    with pytest.raises(ContractError):
        impulse_response(random_ssm(rng, 2, 2), 0)


@pytest.mark.unit
def test_random_systems_agree_with_scan():
    """Kernel convolution and both resolvent paths reproduce the recurrence."""
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n, d = (int(v) for v in rng.integers(1, 5, size=2))
        steps = int(rng.integers(1, 33))
        params = random_ssm(rng, n, d, radius=float(rng.uniform(0.0, 0.95)))
        H = Tensor(rng.normal(size=(steps, d)))
        expected = scan(params, H).data

        kernel = np.stack([g.data for g in impulse_response(params, steps)])
        assert np.abs(convolve_kernel(kernel, H.data) - expected).max() < 1e-10
        assert np.abs(resolvent_apply(params, H).data - expected).max() < 1e-8
        direct = resolvent_apply(params, H, ResolventMethod.DIRECT).data
        assert np.abs(direct - expected).max() < 1e-8


@pytest.mark.unit
def test_resolvent_near_unit_radius(rng):
    params = random_ssm(rng, 3, 2, radius=0.999)
    H = Tensor(rng.normal(size=(16, 2)))

    assert resolvent_taps(0.999, 10_000, 3) > 16
    assert np.abs(resolvent_apply(params, H).data - scan(params, H).data).max() < 1e-8


@pytest.mark.unit
def test_resolvent_truncates_long_sequences(rng):
    params = random_ssm(rng, 2, 2, radius=0.5)
    H = Tensor(rng.normal(size=(200, 2)))

    assert resolvent_taps(0.5, 200, 2) == 42
    assert np.abs(resolvent_apply(params, H).data - scan(params, H).data).max() < 1e-8


@pytest.mark.unit
def test_resolvent_taps_for_nilpotent_a():
    assert resolvent_taps(0.0, 10, 3) == 4
    assert resolvent_taps(0.0, 2, 3) == 2


@pytest.mark.unit
def test_resolvent_rejects_unstable_a(rng):
    params = random_ssm(rng, 2, 2)
    params.A.data = np.diag([1.0, 0.2])

    with pytest.raises(StabilityError):
        resolvent_apply(params, Tensor(np.ones((3, 2))))


@pytest.mark.unit
def test_init_stable_radius_bound():
    params = init_stable(seed=11, n=8, d=4, d_v=3, scale=0.9)

    assert estimate_spectral_radius(params.A.data) <= 0.9 + 1e-9
    assert spectral_radius(params.A.data) == pytest.approx(0.9, abs=1e-9)


@pytest.mark.unit
def test_init_stable_is_deterministic():
    first = init_stable(seed=5, n=3, d=2, d_v=2, scale=0.5)
    second = init_stable(seed=5, n=3, d=2, d_v=2, scale=0.5)

    for name, tensor in first.tensors().items():
        np.testing.assert_array_equal(tensor.data, second.tensors()[name].data)


@pytest.mark.unit
@pytest.mark.parametrize("scale", [0.0, 1.0, 1.5])
def test_init_stable_rejects_scale(scale):
    with pytest.raises(ContractError):
        init_stable(seed=0, n=2, d=2, d_v=2, scale=scale)


@pytest.mark.unit
def test_enforce_stability_rescales_only_when_needed(rng):
    params = random_ssm(rng, 2, 2)
    params.A.data = np.diag([1.2, 0.1])

    assert enforce_stability(params) is True
    assert spectral_radius(params.A.data) < 1.0

    stable = params.A.data.copy()
    assert enforce_stability(params) is False
    np.testing.assert_array_equal(params.A.data, stable)


@pytest.mark.unit
def test_params_reject_wrong_shapes(rng):
    arrays = {name: t.data for name, t in random_ssm(rng, 2, 3).tensors().items()}
    arrays["C"] = np.zeros((2, 3))

    with pytest.raises(DimensionError):
        SsmParams.from_arrays(arrays)


@pytest.mark.unit
def test_feedthrough_drops_the_state_path(rng):
    params = random_ssm(rng, 3, 2)
    H = rng.normal(size=(4, 2))

    np.testing.assert_allclose(feedthrough(params, Tensor(H)).data, H @ params.D.data.T)


@pytest.mark.unit
def test_condition_on_visual_adds_projection_to_every_row(rng):
    params = random_ssm(rng, 2, 3, d_v=2)
    H, V = rng.normal(size=(4, 3)), rng.normal(size=2)

    out = condition_on_visual(params, Tensor(H), Tensor(V)).data

    np.testing.assert_allclose(out, H + params.W_v.data @ V, rtol=0, atol=1e-12)


@pytest.mark.unit
def test_condition_on_visual_rejects_bad_width(rng):
    params = random_ssm(rng, 2, 3, d_v=2)
    with pytest.raises(DimensionError):
        condition_on_visual(params, Tensor(np.zeros((4, 3))), Tensor(np.zeros(3)))


@pytest.mark.unit
def test_prepend_visual_token(rng):
    params = random_ssm(rng, 2, 3, d_v=2)
    H, V = rng.normal(size=(4, 3)), rng.normal(size=2)

    out = prepend_visual_token(params, Tensor(H), Tensor(V)).data

    assert out.shape == (5, 3)
    np.testing.assert_allclose(out[0], params.W_v.data @ V, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(out[1:], H)
