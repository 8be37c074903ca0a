import numpy as np
import pytest
from scipy import integrate

from gphdm import manifold as mf


def test_lorentz_inner_examples():
    mu = mf.origin(2)
    assert mf.lorentz_inner(mu, mu) == -1.0
    assert mf.lorentz_inner([1, 0, 0], [0, 1, 0]) == 0.0
    s = np.sqrt(2.0)
    assert mf.lorentz_inner([s, 1, 0], [s, 0, 1]) == pytest.approx(-2.0, abs=1e-14)


def test_lorentz_inner_length_mismatch():
    with pytest.raises(ValueError):
        mf.lorentz_inner([1, 0, 0], [1, 0])


def test_distance_examples(rng):
    x = mf.random_points(rng, 1, 2)[0]
    assert mf.distance(x, x) == 0.0
    z = np.array([np.cosh(1), np.sinh(1), 0.0])
    assert mf.distance(mf.origin(2), z) == pytest.approx(1.0, abs=1e-12)


def test_distance_matches_arc_length(rng):
    x, z = mf.random_points(rng, 2, 2)
    # arc length of the geodesic curve measured with the Lorentz norm of its derivative
    u = mf.logmap(x, z)

    def speed(t):
        n = mf.lorentz_norm(u)
        dc = n * np.sinh(t * n) * x + np.cosh(t * n) * u
        return mf.lorentz_norm(dc)

    length, _ = integrate.quad(speed, 0.0, 1.0)
    # the curve itself, sampled finely, also gives the same length
    ts = np.linspace(0, 1, 20001)
    pts = mf.geodesic(x, z, ts)
    chord = np.sum(mf.distance(pts[1:], pts[:-1]))
    assert length == pytest.approx(mf.distance(x, z), rel=1e-9)
    assert chord == pytest.approx(mf.distance(x, z), rel=1e-9)


def test_expmap_examples(rng):
    x = mf.random_points(rng, 1, 3)[0]
    assert np.array_equal(mf.expmap(x, np.zeros(4)), x)
    t = 0.7
    out = mf.expmap(mf.origin(2), np.array([0.0, t, 0.0]))
    np.testing.assert_allclose(out, [np.cosh(t), np.sinh(t), 0.0], atol=1e-14)


def test_logmap_examples(rng):
    x = mf.random_points(rng, 1, 2)[0]
    np.testing.assert_allclose(mf.logmap(x, x), 0.0, atol=1e-12)
    z = np.array([np.cosh(1), np.sinh(1), 0.0])
    np.testing.assert_allclose(mf.logmap(mf.origin(2), z), [0, 1, 0], atol=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_exp_log_inverse_up_to_distance_10(rng, dim):
    # base points within a few units of the origin, steps of length up to 10
    x = mf.random_points(rng, 2000, dim, scale=0.5)
    v = rng.standard_normal((2000, dim))
    v *= rng.uniform(0, 10, size=(2000, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    z = mf.exp_local(x, v)
    scale = np.maximum(1.0, np.linalg.norm(v, axis=1))
    assert np.max(np.abs(mf.local_log(x, z) - v).max(axis=1) / scale) < 1e-8
    np.testing.assert_allclose(mf.distance(x, z), np.linalg.norm(v, axis=1), atol=1e-8)
    # ambient form: log_x(exp_x(u)) = u measured with the tangent norm
    u = mf.to_ambient(x, v)
    err = mf.lorentz_norm(mf.project_to_tangent(x, mf.logmap(x, mf.expmap(x, u)) - u))
    assert np.max(err / scale) < 1e-8
    # other direction: exp_x(log_x(z)) = z, measured as a geodesic distance
    z2 = mf.random_points(rng, 2000, dim, scale=2.0)
    keep = mf.distance(x, z2) <= 10
    back = mf.expmap(x[keep], mf.logmap(x[keep], z2[keep]))
    assert np.max(mf.distance(back, z2[keep])) < 1e-8


def test_parallel_transport_properties(rng):
    x, z = mf.random_points(rng, 2, 3)
    u = mf.project_to_tangent(x, rng.standard_normal(4))
    v = mf.project_to_tangent(x, rng.standard_normal(4))
    np.testing.assert_allclose(mf.parallel_transport(x, x, u), u, atol=1e-12)
    tu, tv = mf.parallel_transport(x, z, u), mf.parallel_transport(x, z, v)
    assert abs(mf.lorentz_inner(z, tu)) < 1e-9
    assert mf.lorentz_inner(tu, tv) == pytest.approx(mf.lorentz_inner(u, v), abs=1e-9)


def test_transport_of_canonical_basis_gives_frame(rng):
    z = mf.random_points(rng, 1, 3)[0]
    V = mf.tangent_basis(z)
    for i in range(3):
        e = np.zeros(4)
        e[i + 1] = 1.0
        np.testing.assert_allclose(mf.parallel_transport(mf.origin(3), z, e), V[:, i], atol=1e-12)


def test_tangent_basis_invariants(rng):
    x = mf.random_points(rng, 50, 3, scale=2.0)
    V = mf.tangent_basis(x)
    G = mf.metric_tensor(3)
    np.testing.assert_allclose(np.swapaxes(V, -1, -2) @ G @ V, np.broadcast_to(np.eye(3), (50, 3, 3)), atol=1e-9)
    np.testing.assert_allclose(V @ np.swapaxes(V, -1, -2), mf.projector(x), atol=1e-9 * np.max(x[:, 0]) ** 2)


def test_project_to_tangent(rng):
    x = mf.random_points(rng, 1, 2)[0]
    u = mf.project_to_tangent(x, rng.standard_normal(3))
    np.testing.assert_allclose(mf.project_to_tangent(x, u), u, atol=1e-12)
    np.testing.assert_allclose(mf.project_to_tangent(x, x), 0.0, atol=1e-9)
    w = rng.standard_normal(3)
    once = mf.project_to_tangent(x, w)
    np.testing.assert_allclose(mf.project_to_tangent(x, once), once, atol=1e-9)
    assert abs(mf.lorentz_inner(x, once)) < 1e-9


def test_local_coordinates(rng):
    mu = mf.origin(2)
    np.testing.assert_allclose(mf.to_ambient(mu, np.array([0.3, -2.0])), [0, 0.3, -2.0])
    np.testing.assert_allclose(mf.to_local(mu, np.array([0, 0.3, -2.0])), [0.3, -2.0])
    x = mf.random_points(rng, 100, 3, scale=2)
    v = rng.standard_normal((100, 3))
    u = mf.to_ambient(x, v)
    np.testing.assert_allclose(np.abs(mf.lorentz_inner(x, u)), 0.0, atol=1e-9 * np.max(x[:, 0]) ** 2)
    np.testing.assert_allclose(mf.to_local(x, u), v, atol=1e-10 * np.max(x[:, 0]))
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), mf.lorentz_norm(u), rtol=1e-10)


def test_local_log_matches_frame(rng):
    x, z = mf.random_points(rng, 2, 3)
    direct = mf.tangent_basis(x).T @ mf.metric_tensor(3) @ mf.logmap(x, z)
    np.testing.assert_allclose(mf.local_log(x, z), direct, atol=1e-10)


def test_local_cov_to_ambient(rng):
    x = mf.random_points(rng, 1, 2)[0]
    S = np.array([[0.5, 0.1], [0.1, 0.2]])
    C = mf.local_cov_to_ambient(x, S)
    V = mf.tangent_basis(x)
    np.testing.assert_allclose(C, V @ S @ V.T)
    # the ambient covariance is degenerate along the normal direction
    assert abs(mf.lorentz_inner(x, C @ mf.metric_tensor(2) @ x)) < 1e-9


def test_poincare(rng):
    np.testing.assert_allclose(mf.poincare_from_lorentz(mf.origin(3)), 0.0)
    t = 1.3
    np.testing.assert_allclose(mf.poincare_from_lorentz([np.cosh(t), np.sinh(t), 0]), [np.tanh(t / 2), 0], atol=1e-14)
    norms = [np.linalg.norm(mf.poincare_from_lorentz(mf.expmap(mf.origin(2), [0, r, r]))) for r in np.linspace(0.1, 8, 30)]
    assert np.all(np.diff(norms) > 0) and norms[-1] < 1
    x = mf.random_points(rng, 10, 2)
    np.testing.assert_allclose(mf.lorentz_from_poincare(mf.poincare_from_lorentz(x)), x, atol=1e-10)


def test_metric_axioms(rng):
    a, b, c = (mf.random_points(rng, 200, 2, scale=1.5) for _ in range(3))
    np.testing.assert_allclose(mf.distance(a, b), mf.distance(b, a), atol=1e-12)
    assert np.all(mf.distance(a, c) <= mf.distance(a, b) + mf.distance(b, c) + 1e-9)


def test_pairwise_distance_matches_elementwise(rng):
    X = mf.random_points(rng, 30, 2, scale=2)
    X = np.vstack([X, X[:3] + 0.0])
    D = mf.pairwise_distance(X)
    ref = np.array([[mf.distance(a, b) for b in X] for a in X])
    np.testing.assert_allclose(D, ref, atol=1e-10)
    assert D[0, 30] == 0.0


def test_series_guards_are_continuous():
    r = np.array([0.1 - 1e-12, 0.1 + 1e-12])
    for f in (mf.rho_over_sinh, mf.drho_over_sinh, mf.sinh_over_rho, mf.dsinh_over_rho):
        v = f(r)
        assert abs(v[0] - v[1]) < 1e-10
    assert mf.rho_over_sinh(0.0) == 1.0


@pytest.mark.parametrize("kind", ["hyperbolic", "euclidean"])
def test_geometry_vjps_match_finite_differences(rng, kind):
    g = mf.make_geometry(kind, 2)
    if kind == "hyperbolic":
        Xa, Xb = mf.random_points(rng, 5, 2), mf.random_points(rng, 5, 2)
    else:
        Xa, Xb = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    h = 1e-6

    def check(fun, vjp, cot):
        da, db = vjp(Xa, Xb, cot)
        for which, grad in ((0, da), (1, db)):
            d = rng.standard_normal(Xa.shape)
            if kind == "hyperbolic":
                # the maps are only defined on the manifold; move along it
                d = mf.project_to_tangent((Xa, Xb)[which], d)
            args_p = [Xa, Xb]
            args_m = [Xa, Xb]
            args_p[which] = args_p[which] + h * d
            args_m[which] = args_m[which] - h * d
            fd = (np.sum(cot * fun(*args_p)) - np.sum(cot * fun(*args_m))) / (2 * h)
            assert np.sum(grad * d) == pytest.approx(fd, rel=1e-5, abs=1e-7)

    check(g.sqdist, g.sqdist_vjp, rng.standard_normal((5, 5)))
    check(g.local_steps, g.local_steps_vjp, rng.standard_normal((5, 2)))
    check(g.log_volume, g.log_volume_vjp, rng.standard_normal(5))
    V = rng.standard_normal((5, 2))
    cot = rng.standard_normal((5, 3 if kind == "hyperbolic" else 2))
    d = rng.standard_normal(V.shape)
    fd = (np.sum(cot * g.from_origin_local(V + h * d)) - np.sum(cot * g.from_origin_local(V - h * d))) / (2 * h)
    assert np.sum(g.from_origin_local_vjp(V, cot) * d) == pytest.approx(fd, rel=1e-6)


def test_closure_of_operations(rng):
    x = mf.random_points(rng, 100, 3, scale=2)
    u = mf.to_ambient(x, rng.standard_normal((100, 3)))
    outs = [mf.expmap(x, u), mf.exp_local(x, rng.standard_normal((100, 3))),
            mf.geodesic(x[0], x[1], np.linspace(0, 1, 7)), mf.random_points(rng, 100, 2, scale=3)]
    for y in outs:
        # evaluating <y, y> itself carries a rounding error proportional to y_0^2
        resid = np.abs(mf.lorentz_inner(y, y) + 1.0)
        assert np.all(resid <= 1e-9 * np.maximum(1.0, y[..., 0] ** 2))
        assert np.all(y[..., 0] > 0)
