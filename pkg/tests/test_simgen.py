import numpy as np
import pytest

from seqdcv import seeds, simgen
from seqdcv.errors import InputError, SimulationError
from seqdcv.simgen import HubSpec, ScenarioSpec


def test_singleton_groups_give_identity():
    assert np.array_equal(simgen.hub_covariance(HubSpec(6, 6)), np.eye(6))


def test_constant_decay_hub_row():
    S = simgen.hub_covariance(HubSpec(4, 1, rho_hub=0.5, rho_min=0.5))
    assert np.allclose(S[0], [1, 0.5, 0.5, 0.5])
    # members correlate through the hub
    assert S[1, 2] == pytest.approx(0.25)
    assert np.all(np.diag(S) == 1.0)


def test_linear_decay_from_hub():
    S = simgen.hub_covariance(HubSpec(5, 1, rho_hub=0.9, rho_min=0.1))
    assert np.allclose(S[0, 1:], [0.9, 0.9 - 0.8 / 3, 0.9 - 1.6 / 3, 0.1])


def test_block_structure_of_default_design():
    S = simgen.hub_covariance(HubSpec(1000, 4))
    assert S.shape == (1000, 1000)
    for g in range(4):
        blk = slice(250 * g, 250 * (g + 1))
        assert np.all(S[blk, blk] > 0)
        off = np.ones(1000, dtype=bool)
        off[blk] = False
        assert np.all(S[blk][:, off] == 0)
    assert np.linalg.eigvalsh(S[:250, :250]).min() > 0


def test_repair_flag():
    _, repaired = simgen.hub_covariance(HubSpec(8, 2), return_repair=True)
    assert repaired is False


def test_hub_spec_validation():
    with pytest.raises(InputError):
        HubSpec(10, 3)
    with pytest.raises(InputError):
        HubSpec(10, 2, rho_hub=1.0)


def test_identity_draw_law_of_large_numbers():
    n = 20000
    X = simgen.draw_gaussian(n, np.eye(5), 3)
    C = X.T @ X / n
    assert np.max(np.abs(C - np.eye(5))) < 3 / np.sqrt(n)


def test_draw_is_seeded():
    S = simgen.hub_covariance(HubSpec(6, 2))
    assert np.array_equal(simgen.draw_gaussian(10, S, (1, 2)), simgen.draw_gaussian(10, S, (1, 2)))


def test_hub_correlation_moment():
    S = simgen.hub_covariance(HubSpec(10, 1, rho_hub=0.9))
    X = simgen.draw_gaussian(10000, S, 5)
    assert np.corrcoef(X[:, 0], X[:, 1])[0, 1] == pytest.approx(0.9, abs=0.02)


def test_draw_rejects_non_pd():
    with pytest.raises(SimulationError):
        simgen.draw_gaussian(5, np.array([[1.0, 2.0], [2.0, 1.0]]), 0)


def test_thin_svd(rng):
    X = rng.normal(size=(20, 8))
    U, D, V = simgen.thin_svd(X)
    assert np.linalg.norm(U * D @ V.T - X) / np.linalg.norm(X) < 1e-10
    assert np.allclose(U.T @ U, np.eye(8))
    assert np.all(np.diff(D) <= 0)
    U, D, V = simgen.thin_svd(np.diag([1.0, -3.0, 2.0]))
    assert np.allclose(D, [3, 2, 1])
    assert np.allclose(np.abs(U), np.abs(V)) and np.allclose(np.abs(U).sum(0), 1)
    u, v = rng.normal(size=6), rng.normal(size=4)
    _, D, _ = simgen.thin_svd(np.outer(u, v))
    assert D[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
    assert np.all(D[1:] < 1e-12 * D[0])


def test_inject_common_factors(rng):
    U1, U2 = rng.normal(size=(10, 4)), rng.normal(size=(10, 3))
    a, b = simgen.inject_common_factors(U1, U2, [], None)
    assert np.array_equal(a, U1) and np.array_equal(b, U2)
    L = rng.normal(size=(10, 1))
    a, b = simgen.inject_common_factors(U1, U2, [(1, 1)], L)
    assert np.array_equal(a[:, 1], b[:, 1])
    assert np.linalg.norm(a[:, 1]) == pytest.approx(1.0)
    assert np.array_equal(np.delete(a, 1, axis=1), np.delete(U1, 1, axis=1))
    assert np.array_equal(np.delete(b, 1, axis=1), np.delete(U2, 1, axis=1))
    with pytest.raises(InputError):
        simgen.inject_common_factors(U1, U2, [(4, 0)], L)


def test_shared_direction_canonical_correlation():
    spec = ScenarioSpec("cc", n=2000, p=20, q=10, beta1_star={0: 1.0}, groups1=2, groups2=2)
    d = simgen.build_scenario(spec, 1)
    Q1, _ = np.linalg.qr(d.X1 - d.X1.mean(0))
    Q2, _ = np.linalg.qr(d.X2 - d.X2.mean(0))
    assert np.linalg.svd(Q1.T @ Q2, compute_uv=False)[0] == pytest.approx(1.0, abs=1e-3)


def test_named_scenarios():
    s1a = simgen.scenario("1a")
    assert (s1a.n, s1a.p, s1a.q) == (100, 1000, 100)
    assert s1a.beta1_star == {0: 0.01} and s1a.beta2_star == {}
    assert s1a.shared_columns == ((0, 0),)
    s2b = simgen.scenario("2b")
    assert s2b.beta1_star == {0: 0.01} and s2b.beta2_star == {2: 0.01}
    assert s2b.shared_columns == ((0, 0),)
    assert simgen.scenario("1a", n=50).n == 50
    with pytest.raises(InputError):
        simgen.scenario("9z")
    with pytest.raises(InputError):
        ScenarioSpec("bad", n=10, p=20, beta1_star={10: 1.0})


def test_build_scenario_structure():
    spec = simgen.scenario("2b", p=200, q=40)
    d = simgen.build_scenario(spec, 7)
    assert d.X1.shape == (100, 200) and d.X2.shape == (100, 40)
    assert np.allclose(d.y, d.X1 @ d.beta1 + d.X2 @ d.beta2 + d.noise)
    # X1 beta1 is the injected latent column times 0.01 * D1[0] of the draw
    L = seeds.rng(seeds.child(7, 0)).standard_normal((100, 1))[:, 0]
    Lc = np.linalg.cholesky(simgen.hub_covariance(spec.hub1))
    _, D1, _ = simgen.thin_svd(seeds.rng(seeds.child(7, 1)).standard_normal((100, 200)) @ Lc.T)
    assert np.allclose(d.X1 @ d.beta1, 0.01 * D1[0] * L / np.linalg.norm(L), atol=1e-12)
    again = simgen.build_scenario(spec, 7)
    assert np.array_equal(d.y, again.y)


@pytest.mark.parametrize("name", simgen.NULL_SCENARIOS)
def test_null_scenarios_have_no_direct_x2_effect(name):
    d = simgen.build_scenario(simgen.scenario(name, p=200, q=40), 0)
    assert np.all(d.beta2 == 0)
    assert np.allclose(d.y, d.X1 @ d.beta1 + d.noise)


def test_spec_round_trip():
    s = simgen.scenario("2a")
    assert ScenarioSpec.from_dict(s.to_dict()) == s


def test_gini_contrast():
    assert simgen.gini(np.ones(10)) == pytest.approx(0.0)
    assert simgen.gini([0, 0, 0, 5.0]) == pytest.approx(0.75)
    assert simgen.gini(np.zeros(3)) == 0.0


def test_stream_layout_is_stable():
    a = simgen.build_scenario(simgen.scenario("1a", p=40, q=20), (3, 1))
    noise = simgen.DEFAULT_NOISE_SD * seeds.rng(seeds.child((3, 1), 3)).standard_normal(100)
    assert np.array_equal(a.noise, noise)
