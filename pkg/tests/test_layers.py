import io
import math

import numpy as np
import pytest

from kanforge import params_io
from kanforge import tensor as T
from kanforge.layers import (
    LAYER_KINDS,
    MEXICAN_HAT_NORM,
    GridSpec,
    LayerSpec,
    canonical_kind,
    default_grid,
    flops_estimate,
    forward_bspline_kan,
    forward_larctankan,
    forward_layer,
    forward_linear,
    forward_wavkan,
    init_layer,
    make_stack,
    param_count,
)
from kanforge.tensor import ShapeError, Tensor, grad_check, tsum


def spec_for(kind, fan_in=3, fan_out=2):
    return LayerSpec(kind, fan_in, fan_out, grid=default_grid(kind))


def test_kind_aliases():
    assert canonical_kind("KAN") == "bspline"
    assert canonical_kind("EfficientKAN") == "bspline"
    assert canonical_kind("MLP") == "linear"
    with pytest.raises(ValueError, match="valid kinds"):
        canonical_kind("transformer")


def test_grid_spec_invariants():
    g = GridSpec(-1.0, 1.0, 5, 3)
    assert len(g.knots) == 5 + 2 * 3 + 1
    assert np.allclose(np.diff(g.knots), 2.0 / 5)
    with pytest.raises(ValueError):
        GridSpec(1.0, -1.0, 5, 3)
    with pytest.raises(ValueError):
        GridSpec(-1.0, 1.0, 0, 3)


def test_linear_identity_passthrough():
    spec = LayerSpec("linear", 3, 3, activation="identity")
    params = init_layer(spec, 0)
    params["W"].data[...] = np.eye(3)
    params["b"].data[...] = 0.0
    x = Tensor(np.random.default_rng(0).normal(size=(4, 3)))
    assert np.array_equal(forward_linear(x, params, spec).data, x.data)


def test_linear_relu_clips_negative():
    spec = LayerSpec("linear", 2, 2, activation="relu")
    params = init_layer(spec, 0)
    params["W"].data[...] = -np.eye(2)
    params["b"].data[...] = 0.0
    x = Tensor(np.abs(np.random.default_rng(1).normal(size=(5, 2))))
    assert np.all(forward_linear(x, params, spec).data == 0.0)


def test_bspline_zero_weights_zero_output():
    spec = spec_for("bspline")
    params = init_layer(spec, 0)
    params["W_base"].data[...] = 0.0
    params["W_spline"].data[...] = 0.0
    x = Tensor(np.random.default_rng(2).uniform(-1, 1, (6, 3)))
    assert np.all(forward_bspline_kan(x, params, spec).data == 0.0)


def test_bspline_base_path_is_silu():
    spec = LayerSpec("bspline", 1, 1)
    params = init_layer(spec, 0)
    params["W_base"].data[...] = 1.0
    params["W_spline"].data[...] = 0.0
    x = np.array([[0.3], [-0.8], [0.0]])
    out = forward_bspline_kan(Tensor(x), params, spec)
    expected = x / (1.0 + np.exp(-x)) * 1.0
    assert np.allclose(out.data, expected, atol=1e-15)


def test_fastkan_center_hit_and_zero_weights():
    grid = default_grid("fastkan")
    spec = LayerSpec("fastkan", 1, 1, grid=grid)
    params = init_layer(spec, 0)
    params["W_rbf"].data[...] = 0.0
    x = Tensor(np.array([[0.1], [1.0]]))
    assert np.all(forward_layer(spec, params, x).data == 0.0)
    # exact center: that feature contributes its coefficient times exp(0)=1
    centers = grid.lo + np.arange(grid.G) * (grid.hi - grid.lo) / (grid.G - 1)
    params["W_rbf"].data[0, 3] = 2.5
    out = forward_layer(spec, params, Tensor(np.array([[centers[3]]])))
    others = np.exp(-0.5 * ((centers[3] - np.delete(centers, 3)) / ((grid.hi - grid.lo) / (grid.G - 1))) ** 2)
    assert out.data[0, 0] == pytest.approx(2.5, abs=1e-6)  # neighbors decay fast
    assert np.all(others < 0.7)


def test_wavkan_mother_wavelet_values():
    assert MEXICAN_HAT_NORM == pytest.approx(0.8673250706, abs=1e-10)
    spec = LayerSpec("wavkan", 1, 1)
    params = init_layer(spec, 0)
    params["weight"].data[...] = 1.0
    params["log_scale"].data[...] = 0.0
    params["translation"].data[...] = 0.25
    # x == translation -> u=0 -> psi(0) = the normalization constant
    out = forward_wavkan(Tensor(np.array([[0.25]])), params, spec)
    assert out.data[0, 0] == pytest.approx(MEXICAN_HAT_NORM, abs=1e-12)
    # u = +-1 -> psi vanishes
    out = forward_wavkan(Tensor(np.array([[1.25], [-0.75]])), params, spec)
    assert np.max(np.abs(out.data)) < 1e-15


def test_fourierkan_cosine_only_at_zero():
    spec = spec_for("fourierkan")
    params = init_layer(spec, 3)
    x = Tensor(np.zeros((2, 3)))
    out = forward_layer(spec, params, x)
    expected = params["A"].data.reshape(2, 3, 5).sum(axis=(1, 2))
    assert np.allclose(out.data, np.tile(expected, (2, 1)), atol=1e-12)


def test_fourierkan_zero_coefficients():
    spec = spec_for("fourierkan")
    params = init_layer(spec, 3)
    params["A"].data[...] = 0.0
    params["B"].data[...] = 0.0
    out = forward_layer(spec, params, Tensor(np.random.default_rng(3).normal(size=(4, 3))))
    assert np.all(out.data == 0.0)


def test_larctankan_unit_case():
    spec = LayerSpec("larctankan", 1, 1)
    params = init_layer(spec, 0)
    params["W"].data[...] = 1.0
    params["b"].data[...] = 0.0
    params["slope"].data[...] = 1.0
    out = forward_larctankan(Tensor(np.array([[1.0]])), params, spec)
    assert out.data[0, 0] == pytest.approx(math.pi / 4, abs=1e-12)


def test_larctankan_zero_slope_outputs_bias_exactly():
    spec = LayerSpec("larctankan", 4, 3)
    params = init_layer(spec, 9)
    params["slope"].data[...] = 0.0
    x = Tensor(np.random.default_rng(4).normal(size=(7, 4)) * 100.0)
    out = forward_layer(spec, params, x)
    assert np.array_equal(out.data, np.tile(params["b"].data, (7, 1)))


@pytest.mark.parametrize("kind", LAYER_KINDS)
def test_forward_grad_check_input_and_params(kind):
    for trial in range(5):
        rng = np.random.default_rng(1000 + trial)
        spec = LayerSpec(kind, 3, 2, grid=default_grid(kind),
                         activation="identity" if kind == "linear" else "identity")
        params = init_layer(spec, trial)
        x = Tensor(rng.uniform(-1.2, 1.2, (4, 3)))
        probe = Tensor(rng.normal(size=(4, 2)))

        err = grad_check(lambda t: tsum(T.mul(forward_layer(spec, params, t), probe)), x, h=1e-5)
        assert err < 1e-4, f"{kind} input grad, trial {trial}: {err}"

        for name in params.tensors:
            def wrt_param(t, name=name):
                saved = params.tensors[name]
                params.tensors[name] = t
                try:
                    return tsum(T.mul(forward_layer(spec, params, Tensor(x.data)), probe))
                finally:
                    params.tensors[name] = saved

            err = grad_check(wrt_param, params[name], h=1e-5)
            assert err < 1e-4, f"{kind}.{name} grad, trial {trial}: {err}"


def test_fan_mismatch_raises():
    spec = spec_for("bspline", fan_in=3)
    params = init_layer(spec, 0)
    with pytest.raises(ShapeError, match="expects"):
        forward_layer(spec, params, Tensor(np.zeros((2, 5))))


def test_param_count_examples():
    assert param_count(LayerSpec("linear", 16, 8)) == 136
    assert param_count(LayerSpec("bspline", 16, 8, grid=GridSpec(-1, 1, 5, 3))) == 1152
    ratio_formula = (1 + 5 + 3) * 16 * 16 / (16 * 16 + 16)
    realized = param_count(LayerSpec("bspline", 16, 16)) / param_count(LayerSpec("linear", 16, 16))
    assert realized == pytest.approx(ratio_formula, abs=1e-12)


def test_param_count_matches_instantiation_sweep():
    rng = np.random.default_rng(7)
    cases = 0
    for kind in LAYER_KINDS:
        for _ in range(9):
            fi, fo = int(rng.integers(1, 24)), int(rng.integers(1, 24))
            G = int(rng.integers(2, 9))
            k = int(rng.integers(0, 4))
            spec = LayerSpec(kind, fi, fo, grid=GridSpec(-1.0, 1.0, G, k))
            params = init_layer(spec, cases)
            assert params.total_size == param_count(spec), (kind, fi, fo, G, k)
            cases += 1
    assert cases >= 50


def test_flops_linear_closed_form():
    assert flops_estimate(LayerSpec("linear", 16, 8), batch=1) == 2 * 16 * 8 + 8


def test_flops_linear_in_batch():
    for kind in LAYER_KINDS:
        spec = spec_for(kind)
        assert flops_estimate(spec, batch=13) == 13 * flops_estimate(spec, batch=1)


def test_flops_bspline_exceeds_linear_for_all_grid_sizes():
    for G in range(1, 7):
        bspline = LayerSpec("bspline", 8, 8, grid=GridSpec(-1, 1, G, 3))
        linear = LayerSpec("linear", 8, 8)
        assert flops_estimate(bspline) > flops_estimate(linear), G


def test_init_deterministic_and_seed_sensitive():
    spec = spec_for("bspline", 5, 4)
    a = init_layer(spec, 11)
    b = init_layer(spec, 11)
    c = init_layer(spec, 12)
    for name in a.tensors:
        assert np.array_equal(a[name].data, b[name].data)
    assert any(not np.array_equal(a[name].data, c[name].data) for name in a.tensors)


def test_init_glorot_bounds():
    # 50*20 = 1000 weight samples
    spec = LayerSpec("linear", 50, 20)
    params = init_layer(spec, 5)
    bound = math.sqrt(6.0 / (50 + 20))
    assert params["W"].size == 1000
    assert np.max(np.abs(params["W"].data)) <= bound
    assert np.all(params["b"].data == 0.0)
    # 16 -> 8 example from the closed form
    small = init_layer(LayerSpec("linear", 16, 8), 5)
    assert np.max(np.abs(small["W"].data)) <= math.sqrt(6.0 / 24)


def test_init_coefficients_scaled_down():
    spec = spec_for("bspline", 6, 6)
    params = init_layer(spec, 3)
    bound = math.sqrt(6.0 / 12)
    assert np.max(np.abs(params["W_spline"].data)) <= 0.1 * bound
    assert np.max(np.abs(params["W_base"].data)) > 0.1 * bound  # base not scaled


def test_params_container_roundtrip_bit_exact():
    spec = spec_for("wavkan", 4, 3)
    params = init_layer(spec, 21)
    entries = [(name, t.data) for name, t in params.items()]
    buf = io.BytesIO()
    params_io.write_params(buf, entries)
    buf.seek(0)
    back = params_io.read_params(buf)
    assert [name for name, _ in back] == [name for name, _ in entries]
    for (_, orig), (_, loaded) in zip(entries, back):
        assert orig.shape == loaded.shape
        assert np.array_equal(orig, loaded)


def test_params_container_rejects_garbage():
    with pytest.raises(params_io.ParamFormatError, match="magic"):
        params_io.read_params(io.BytesIO(b"not a container"))
    blob = params_io.params_to_bytes([("w", np.ones(3))])
    with pytest.raises(params_io.ParamFormatError, match="truncated"):
        params_io.params_from_bytes(blob[:-4])


def test_make_stack_shapes_and_final_linear():
    stack = make_stack("larctankan", [1, 8, 8, 1], seed=2)
    assert stack.layers[-1][0].kind == "linear"
    assert stack.layers[0][0].kind == "larctankan"
    out = stack.forward(np.linspace(-1, 1, 16).reshape(-1, 1))
    assert out.shape == (16, 1)
    assert stack.total_params == sum(p.total_size for _, p in stack.layers)
