import numpy as np
import pytest

from proxnet.errors import InvalidParameterError
from proxnet.geom import Configuration, Window, configuration, sample_ppp
from proxnet.graphs import ProximityTemplate, build_proximity, build_rng, components, is_subgraph
from proxnet.robust import (RobustRule, ac_sweep, adversarial_soundness_check, region_inside,
                            robust_subnetwork)


def test_central_pair_survives():
    c = configuration([(4.5, 5), (5.5, 5)], Window.square(10))
    rep = robust_subnetwork(c)
    assert rep.net.edge_set() == {(0, 1)}
    assert rep.n0 == 0 and rep.connected


def test_pair_near_boundary_dropped_and_killable():
    w = Window.square(10)
    c = configuration([(0.2, 5), (0.2, 6)], w)
    assert build_rng(c).edge_set() == {(0, 1)}
    rep = robust_subnetwork(c)
    assert rep.net.m == 0 and rep.n0 == 1
    # an outside city in the exterior part of the lune kills the edge
    outer = Window(-5, -5, 15, 15)
    with_outsider = Configuration(np.vstack([c.points, [[-0.3, 5.5]]]), outer)
    assert (0, 1) not in build_rng(with_outsider).edge_set()


def test_mst_rule_rejected():
    with pytest.raises(InvalidParameterError):
        RobustRule.parse("mst")
    with pytest.raises(InvalidParameterError):
        ac_sweep("mst", [10], 1, 0)


def test_rule_parsing():
    assert RobustRule.parse("rng").name == "rng"
    assert RobustRule.parse("gabriel").template.kind == "gabriel_disc"
    assert RobustRule.parse("beta:1.5").template.beta == 1.5
    t = ProximityTemplate("beta_lune", 1.2)
    assert RobustRule.parse(t).template == t


def test_cities_outside_window_rejected():
    c = configuration([(1, 1), (5, 5)], Window.square(10))
    with pytest.raises(InvalidParameterError):
        robust_subnetwork(c, "rng", Window.square(3))


@pytest.mark.parametrize("rule", ["rng", "gabriel", "beta:1.5"])
def test_soundness_and_maximality(rule):
    rule = RobustRule.parse(rule)
    for seed in range(10):
        c = sample_ppp(Window.square(15), 1.0, seed)
        rep = robust_subnetwork(c, rule)
        full = build_proximity(c, rule.template)
        assert is_subgraph(rep.net, full)
        # every edge whose region sits inside the window shrunk by a margin is kept
        inner = Window(0.01, 0.01, 14.99, 14.99)
        deep = region_inside(c.points, full.edges, rule.template, inner)
        assert is_subgraph(full.subnetwork(deep), rep.net)
        assert 0 <= rep.n0 <= rep.n_cities
        assert rep.n0 == rep.n_cities - rep.largest_component_size
        if rep.connected:
            assert rep.n0 == 0


def test_adversarial_empty_and_zero_trials():
    assert adversarial_soundness_check(sample_ppp(Window.square(10), 0.0, 0))
    assert adversarial_soundness_check(sample_ppp(Window.square(10), 1.0, 1), trials=0)


@pytest.mark.parametrize("rule", ["rng", "gabriel"])
def test_adversarial_check_passes(rule):
    for seed in range(3):
        c = sample_ppp(Window.square(12), 1.0, seed)
        assert adversarial_soundness_check(c, rule, trials=5, seed=seed)


def test_adversarial_check_catches_unsound_certificate(monkeypatch):
    # pretend every region is inside: the targeted batch must then kill a boundary edge
    import proxnet.robust as robust
    monkeypatch.setattr(robust, "region_inside",
                        lambda points, edges, template, window: np.ones(len(edges), bool))
    c = sample_ppp(Window.square(10), 1.0, 3)
    assert not robust.adversarial_soundness_check(c, "rng", trials=0)


def test_ac_sweep_small_windows():
    res = ac_sweep("rng", [0.5], 5, 11)
    assert len(res.rows) == 5
    for r in res.rows:
        if r["n_cities"] <= 1:
            assert r["n0"] == 0


def test_ac_sweep_columns_and_determinism():
    a = ac_sweep("rng", [5, 10], 3, 2)
    b = ac_sweep("rng", [5, 10], 3, 2, workers=2)
    assert a.columns == ["rule", "L", "replicate", "seed", "n_cities", "n0", "n0_over_L2"]
    assert a.csv_text() == b.csv_text()
    assert len(a.summary["per_L"]) == 2


def test_ac_sweep_rejects_bad_Ls():
    with pytest.raises(InvalidParameterError):
        ac_sweep("rng", [20, 10], 1, 0)
    with pytest.raises(InvalidParameterError):
        ac_sweep("rng", [10], 0, 0)


def test_ac_trend_L40_below_L10():
    res = ac_sweep("rng", [10, 40], 100, 5)
    m10, m40 = (p["mean"] for p in res.summary["per_L"])
    assert m40 < m10


def test_components_of_report_match_network():
    c = sample_ppp(Window.square(10), 1.0, 4)
    rep = robust_subnetwork(c)
    assert np.array_equal(rep.components.labels, components(rep.net).labels)
