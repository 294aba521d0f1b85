import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtransform import core
from gtransform.core import GTParams, blend_kernel, gt_forward_1d, gt_forward_2d, gt_grad_input, gt_grad_params
from gtransform.errors import ConfigError, DimensionMismatch, EmptyTransformList, InvalidSize, StaleCache
from gtransform.kernels import TransformKind as K, build_kernel

from oracles import central_difference, dft2_double_sum, norm_rel_err, rel_err


def corners(transforms):
    m = len(transforms) - 1
    for i in range(m + 1):
        w = np.zeros(m)
        if i < m:
            w[i] = 1.0
        yield transforms[i], GTParams(transforms, tuple(w), 1.0)


def test_blend_corners_exact():
    np.testing.assert_array_equal(blend_kernel(core.make_vision_params(), 8).entries,
                                  build_kernel(K.DCT2, 8).entries)
    haar = core.make_vision_params((0, 0))
    np.testing.assert_array_equal(blend_kernel(haar, 8).entries, build_kernel(K.HAAR, 8).entries)
    same = GTParams((K.IDENTITY, K.IDENTITY), (0.3,))
    np.testing.assert_allclose(blend_kernel(same, 4).entries, np.eye(4), atol=1e-15)


def test_blend_is_affine():
    p = core.make_vision_params((0.3, -1.2), 0.4)
    b = blend_kernel(p, 8)
    fs = [build_kernel(t, 8).entries for t in p.transforms]
    want = 0.3 * fs[0] - 1.2 * fs[1] + (1 - 0.3 + 1.2) * fs[2]
    np.testing.assert_allclose(b.entries, want, atol=1e-13)
    np.testing.assert_array_equal(b.derivative(1), fs[1] - fs[2])


def test_params_validation():
    with pytest.raises(EmptyTransformList):
        GTParams((K.DFT,), ())
    with pytest.raises(ConfigError):
        GTParams((K.DFT, K.DLT), (1.0, 2.0))
    with pytest.raises(InvalidSize):
        blend_kernel(core.make_vision_params(), 6)


def test_forward_examples(rng):
    x = rng.normal(size=8)
    out, _ = gt_forward_1d(core.make_vision_params(), x)
    np.testing.assert_allclose(out, build_kernel(K.DCT2, 8).entries.real @ x, atol=1e-12)
    ident = core.make_nlp_params((0, 0))
    np.testing.assert_allclose(gt_forward_1d(ident, [5, -2, 7])[0], [5, -2, 7], atol=1e-15)
    np.testing.assert_allclose(gt_forward_1d(core.make_nlp_params(), [1, 1, 1, 1])[0], [4, 0, 0, 0], atol=1e-12)
    with pytest.raises(DimensionMismatch):
        gt_forward_1d(core.make_nlp_params(), np.ones((3, 4)), kernel=blend_kernel(core.make_nlp_params(), 5))


def test_mixer_uses_imaginary_part(rng):
    x = rng.normal(size=4)
    y = build_kernel(K.DFT, 4).entries @ x
    out, _ = gt_forward_1d(core.make_nlp_params(mixer=0.25), x)
    np.testing.assert_allclose(out, 0.25 * y.real + 0.75 * y.imag, atol=1e-12)


@pytest.mark.parametrize("transforms", [core.VISION_TRANSFORMS, core.NLP_TRANSFORMS])
def test_corner_recovery_1d_2d(rng, transforms):
    for kind, p in corners(transforms):
        f = build_kernel(kind, 8).entries
        x = rng.normal(size=8)
        np.testing.assert_allclose(gt_forward_1d(p, x)[0], (f @ x).real, atol=1e-12, rtol=0)
        X = rng.normal(size=(8, 8))
        np.testing.assert_allclose(gt_forward_2d(p, X)[0], (f @ X @ f.T).real, atol=1e-12, rtol=0)


def test_forward_2d_examples(rng):
    X = rng.normal(size=(3, 3))
    np.testing.assert_allclose(gt_forward_2d(core.make_nlp_params((0, 0)), X)[0], X, atol=1e-15)
    X = rng.normal(size=(4, 4))
    np.testing.assert_allclose(gt_forward_2d(core.make_nlp_params(), X)[0], dft2_double_sum(X).real, atol=1e-10)


def test_2d_matches_rowwise_then_columnwise(rng):
    p = core.make_nlp_params((0.4, 0.7), 0.3)
    X = rng.normal(size=(5, 7))
    br, bc = blend_kernel(p, 5).entries, blend_kernel(p, 7).entries
    rows = np.array([bc @ row for row in X.astype(complex)])
    cols = np.array([br @ col for col in rows.T]).T
    np.testing.assert_allclose(gt_forward_2d(p, X)[0], 0.3 * cols.real + 0.7 * cols.imag, atol=1e-12)


def test_batched_forward_matches_loop(rng):
    p = core.make_vision_params((0.2, 0.5), 0.7)
    xs = rng.normal(size=(4, 8, 8))
    batch = gt_forward_2d(p, xs)[0]
    for i in range(4):
        np.testing.assert_allclose(batch[i], gt_forward_2d(p, xs[i])[0], atol=1e-12)


def test_grad_trivial_cases(rng):
    p = core.make_vision_params((0.3, 0.2), 0.6)
    x = rng.normal(size=8)
    _, y = gt_forward_1d(p, x)
    dp, dp3 = gt_grad_params(p, x, np.zeros(8), y)
    assert not np.any(dp) and dp3 == 0
    same = GTParams((K.DFT, K.DFT, K.DFT), (0.3, 0.9), 0.2)
    _, y = gt_forward_1d(same, x)
    dp, _ = gt_grad_params(same, x, rng.normal(size=8), y)
    np.testing.assert_array_equal(dp, 0)
    with pytest.raises(StaleCache):
        gt_grad_params(p, x, np.ones(8), y[:4])


def test_grad_input_corners(rng):
    g = rng.normal(size=6)
    np.testing.assert_allclose(gt_grad_input(core.make_nlp_params((0, 0)), g), g, atol=1e-15)
    g = rng.normal(size=8)
    c = build_kernel(K.DCT2, 8).entries.real
    np.testing.assert_allclose(gt_grad_input(core.make_vision_params(), g), c.T @ g, atol=1e-12)


def _fd_params(p, x, g, ndim):
    def f(v):
        return np.sum(g * core.forward(p.with_vector(v), x, ndim))
    return central_difference(f, p.as_vector())


def test_grad_example_vision(rng):
    p = core.make_vision_params((0.3, 0.2), 0.6)
    x, g = rng.normal(size=8), rng.normal(size=8)
    _, y = gt_forward_1d(p, x)
    dp, dp3 = gt_grad_params(p, x, g, y)
    assert rel_err(np.append(dp, dp3), _fd_params(p, x, g, 1)) < 1e-6


@pytest.mark.parametrize("n", [4, 8, 16])
@pytest.mark.parametrize("ndim", [1, 2])
def test_gradients_match_finite_differences(n, ndim):
    r = np.random.default_rng(n * 10 + ndim)
    worst = 0.0
    for trial in range(9):
        transforms = core.VISION_TRANSFORMS if trial % 2 else core.NLP_TRANSFORMS
        p = GTParams(transforms, tuple(r.normal(size=2)), r.normal(0.5, 0.5))
        shape = (n,) * ndim
        x, g = r.normal(size=shape), r.normal(size=shape)
        _, y = core.gt_forward_1d(p, x) if ndim == 1 else gt_forward_2d(p, x)
        dp, dp3 = gt_grad_params(p, x, g, y, ndim=ndim)
        worst = max(worst, rel_err(np.append(dp, dp3), _fd_params(p, x, g, ndim)))
        gx = gt_grad_input(p, g, ndim=ndim)
        num = central_difference(lambda z: np.sum(g * core.forward(p, z, ndim)), x)
        worst = max(worst, norm_rel_err(gx, num))
    assert worst < 1e-6


def test_batched_1d_grad_sums_over_batch(rng):
    p = core.make_nlp_params((0.4, 0.1), 0.8)
    xs, gs = rng.normal(size=(5, 6)), rng.normal(size=(5, 6))
    _, y = gt_forward_1d(p, xs)
    dp, dp3 = gt_grad_params(p, xs, gs, y, ndim=1)
    parts = [gt_grad_params(p, xs[i], gs[i], gt_forward_1d(p, xs[i])[1]) for i in range(5)]
    np.testing.assert_allclose(dp, sum(q[0] for q in parts), atol=1e-12)
    assert dp3 == pytest.approx(sum(q[1] for q in parts), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8, 16]))
def test_linear_in_x_and_affine_in_p(seed, n):
    r = np.random.default_rng(seed)
    p = core.make_vision_params(tuple(r.normal(size=2)), r.normal())
    x, z = r.normal(size=n), r.normal(size=n)
    a, b = r.normal(size=2)
    f = lambda v: gt_forward_1d(p, v)[0]
    lhs, rhs = f(a * x + b * z), a * f(x) + b * f(z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs))) * n
    delta = 0.37
    for i in range(2):
        w = np.array(p.weights)
        w[i] += delta
        moved = gt_forward_1d(p.replace(weights=tuple(w)), x)[0]
        slope = core.mix(x @ blend_kernel(p, n).derivative(i).T, p.mixer)
        np.testing.assert_allclose(moved - f(x), delta * slope, atol=1e-11 * max(1, np.max(np.abs(moved))))


def test_serialization_round_trip_bit_exact(rng):
    blocks = {f"b{i}": core.make_vision_params(tuple(rng.normal(size=2) * 10), rng.normal()) for i in range(5)}
    blocks["odd"] = GTParams(core.NLP_TRANSFORMS, (0.1 + 0.2, -3.63), 1 / 3)
    back = core.load_params(core.dump_params(blocks))
    assert list(back) == list(blocks)
    for name in blocks:
        assert back[name] == blocks[name]
        assert back[name].as_vector().tobytes() == blocks[name].as_vector().tobytes()


def test_load_rejects_bad_text():
    with pytest.raises(ConfigError):
        core.load_params("[a]\ntransforms = dft, dlt\nweights = x\nmixer = 1\n")
    with pytest.raises(ConfigError):
        core.load_params("[a]\ntransforms = dft, dlt\nmixer = 1\n")
    with pytest.raises(ConfigError):
        core.load_params("no section header")


def test_learned_fixture():
    t = core.learned_vision_params()
    assert len(t) == 9
    y24 = t["gtnet24.y"]
    assert y24.weights == (0.84, 0.15) and y24.mixer == 0.65
    assert t["gtnet48.y"].weights[0] == -3.63
    assert t["gtnet64.cr"].as_vector().tolist() == [3.12, 1.71, 0.61]
