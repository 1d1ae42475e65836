"""Tests for scenario variable lists and design-matrix construction."""

import numpy as np
import pytest

from nettmle.design import (
    SCENARIOS,
    bin_codes,
    build_design,
    encode_features,
    fit_bin_edges,
    get_scenario,
    quantile_edges,
)


def test_all_four_scenarios_registered():
    assert set(SCENARIOS) == {"CC", "CW", "WC", "Flexible"}


def test_cw_outcome_model_drops_infected_neighbours():
    assert "xi_inf_nbrs" in get_scenario("CC").outcome_vars
    assert "xi_inf_nbrs" not in get_scenario("CW").outcome_vars


def test_wc_exposure_model_omits_summary_covariates():
    wc = get_scenario("WC")
    assert "xi_s_mean" not in wc.exposure_vars
    assert "xi_s_infsum" not in wc.summary_vars


def test_summary_model_conditions_on_alpha():
    for spec in SCENARIOS.values():
        assert spec.summary_vars[0] == "alpha"
        assert "alpha" not in spec.exposure_vars


def test_unknown_scenario():
    with pytest.raises(ValueError):
        get_scenario("XX")


def test_quantile_edges_are_unique():
    """Ties collapse duplicate cut points."""
    edges = quantile_edges(np.array([0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0]))
    assert len(edges) == len(np.unique(edges))


def test_bin_codes_put_edge_values_in_upper_bin():
    assert bin_codes(np.array([0.5, 1.0, 1.5, 3.0]), np.array([1.0, 2.0])).tolist() == [0, 1, 1, 2]


def test_cc_outcome_design_columns(observed):
    panel, _, _ = observed
    design = build_design(panel, get_scenario("CC"), panel.time_horizon, "outcome")
    assert design.columns == get_scenario("CC").outcome_vars
    assert design.matrix.shape == (panel.n, 7)


def test_flexible_design_uses_indicator_columns(observed):
    panel, _, _ = observed
    spec = get_scenario("Flexible")
    design = build_design(panel, spec, panel.time_horizon, "outcome")
    assert "xi_static[q1]" in design.columns
    assert "xi_static" not in design.columns
    block = [i for i, c in enumerate(design.columns) if c.startswith("xi_static[")]
    assert set(np.unique(design.matrix[:, block])) <= {0.0, 1.0}
    assert (design.matrix[:, block].sum(axis=1) <= 1).all()


def test_copies_reuse_observed_bin_edges(observed):
    """Passing observed edges keeps the copy's columns aligned with the observed design."""
    panel, _, _ = observed
    spec = get_scenario("Flexible")
    horizon = panel.time_horizon
    edges = fit_bin_edges(panel, spec, horizon)
    shifted = build_design(panel, spec, horizon, "exposure", edges)
    assert shifted.bin_edges.keys() == edges.keys()
    assert all(np.array_equal(shifted.bin_edges[k], edges[k]) for k in edges)


def test_encode_features_selects_outcome_vars(observed):
    panel, _, _ = observed
    spec = get_scenario("CW")
    encoded = encode_features(panel.window(3), spec, {})
    assert encoded.shape == (panel.n, 3, len(spec.outcome_vars))


def test_encode_features_bins_to_codes(observed):
    panel, _, _ = observed
    spec = get_scenario("Flexible")
    edges = fit_bin_edges(panel, spec, panel.time_horizon)
    encoded = encode_features(panel.window(2), spec, edges)
    col = spec.outcome_vars.index("xi_static")
    assert set(np.unique(encoded[..., col])) <= set(range(len(edges["xi_static"]) + 1))
