import dataclasses
import json
import warnings

import numpy as np
import pytest

from antimaser.errors import DomainError, InfeasibleMeasurementError
from antimaser.yfactor import (GAMMA_POWER, GAMMA_VOLTAGE, MeasurementRecord, delta_y,
                               fit_report, fit_tm, forward_y, lna_mismatch_bound,
                               monte_carlo_ci, prepare_netlist, reflection_gamma, sample_inputs,
                               worst_case_tm)

REFERENCE = {"10dB_5K": 2.5, "10dB_10K": 6.5, "10dB_20K": 10.5, "10dB_30K": 13.4,
             "20dB_5K": 3.0, "20dB_10K": 5.6, "20dB_20K": 8.0, "20dB_30K": 10.3}


def test_reflection_conventions():
    assert reflection_gamma(-3.8, GAMMA_VOLTAGE) == pytest.approx(0.6457, rel=1e-3)
    assert reflection_gamma(-3.8, GAMMA_POWER) == pytest.approx(0.41, abs=0.01)
    with pytest.raises(DomainError):
        reflection_gamma(-3.8, "amplitude")


def test_forward_y_rises_as_cavity_cools(measurements):
    _, net, recs = measurements
    p = prepare_netlist(net, recs["10dB_5K"])
    ys = [float(forward_y(p, t, 0.4)) for t in (0.0, 2.5, 5.0)]
    assert ys[0] > ys[1] > ys[2]


def test_synthetic_round_trip(measurements):
    _, net, recs = measurements
    rec = recs["10dB_5K"]
    dy = delta_y(net, rec, 1.7)
    synth = dataclasses.replace(rec, delta_y_db=dy)
    assert fit_tm(net, synth) == pytest.approx(1.7, abs=1e-3)
    assert fit_tm(net, dataclasses.replace(rec, delta_y_db=delta_y(net, rec, 1.7, GAMMA_VOLTAGE)),
                  GAMMA_VOLTAGE) == pytest.approx(1.7, abs=1e-3)


def test_fit_residual(measurements):
    _, net, recs = measurements
    t, res = fit_tm(net, recs["10dB_5K"], return_residual=True)
    assert res < 1e-4
    assert delta_y(net, recs["10dB_5K"], t) == pytest.approx(0.17, abs=1e-4)


@pytest.mark.parametrize("label", sorted(REFERENCE))
def test_measured_column(measurements, label):
    _, net, recs = measurements
    t = fit_tm(net, recs[label])
    if label == "10dB_5K":
        assert t == pytest.approx(2.5, abs=0.3)
    assert t == pytest.approx(REFERENCE[label], rel=0.20)


def test_infeasible_measurement(measurements):
    _, net, recs = measurements
    bad = dataclasses.replace(recs["10dB_5K"], delta_y_db=5.0)
    with pytest.raises(InfeasibleMeasurementError):
        fit_tm(net, bad)
    row = fit_report(net, bad, n_samples=0)
    assert row["flag"] and "t_m_k" not in row


def test_heating_offset_widens_bracket(measurements):
    _, net, recs = measurements
    rec = dataclasses.replace(recs["10dB_5K"], heating_offset_k=2.0)
    dy = delta_y(net, rec, 6.0)
    assert fit_tm(net, dataclasses.replace(rec, delta_y_db=dy)) == pytest.approx(6.0, abs=1e-3)


def test_alternative_coupler(measurements):
    _, net, recs = measurements
    a = fit_tm(net, recs["10dB_5K"])
    b = fit_tm(net, recs["10dB_5K"], coupling_loss_db=10.1)
    assert 0 < abs(a - b) < 0.2


def test_monte_carlo_determinism(measurements):
    _, net, recs = measurements
    a = monte_carlo_ci(net, recs["10dB_5K"], 500, seed=11)
    b = monte_carlo_ci(net, recs["10dB_5K"], 500, seed=11)
    c = monte_carlo_ci(net, recs["10dB_5K"], 500, seed=12)
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()
    assert a.ci_low < a.t_m < a.ci_high
    assert json.loads(a.to_json())["seed"] == 11


def test_draws_depend_only_on_seed_and_index(measurements):
    _, net, recs = measurements
    p = prepare_netlist(net, recs["10dB_5K"])
    small, v_small = sample_inputs(p, recs["10dB_5K"], 100, 3)
    big, v_big = sample_inputs(p, recs["10dB_5K"], 1000, 3)
    assert np.array_equal(v_small["delta_y_db"], v_big["delta_y_db"][:100])
    assert np.array_equal(small.stages[0].loss_db, big.stages[0].loss_db[:100])


def test_draws_respect_physical_bounds(measurements):
    _, net, recs = measurements
    rec = recs["10dB_5K"]
    p = prepare_netlist(net, rec)
    sampled, vals = sample_inputs(p, rec, 20000, 0, {(("stage", 0), "loss_db"): 20.0})
    assert np.all(sampled.stages[0].loss_db >= 0)
    assert np.all(vals["s11_light_db"] <= 0)


def test_zero_sigma_is_point_estimate(measurements):
    _, net, recs = measurements
    rec = dataclasses.replace(recs["10dB_5K"], sigma={})
    stages = tuple(s.replace(sigma={}) for s in net.stages)
    bare = dataclasses.replace(net, stages=stages, sigma={})
    fr = monte_carlo_ci(bare, rec, 200, seed=0)
    assert fr.ci_low == fr.ci_high == fr.t_m == pytest.approx(fr.t_m_point, abs=1e-9)


def test_min_samples(measurements):
    _, net, recs = measurements
    with pytest.raises(DomainError):
        monte_carlo_ci(net, recs["10dB_5K"], 10)


def test_lna_mismatch_bound():
    tab = [(0.0, 2.5), (0.6, 6.0), (0.8, 10.0)]
    assert lna_mismatch_bound(0.3, tab) == pytest.approx(4.25)
    assert lna_mismatch_bound(0.7, tab) == pytest.approx(8.0)
    with pytest.warns(UserWarning):
        assert lna_mismatch_bound(0.9, tab) == 10.0
    with pytest.raises(DomainError):
        lna_mismatch_bound(0.5, [(0.6, 1.0), (0.2, 2.0)])


def test_worst_case_not_above_headline(measurements):
    d, net, recs = measurements
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        t_b, extra = worst_case_tm(net, recs["10dB_10K"], d["lna_noise_table"])
    assert extra > 0
    assert t_b <= fit_tm(net, recs["10dB_10K"])


def test_fit_report_row(measurements):
    d, net, recs = measurements
    row = fit_report(net, recs["10dB_5K"], n_samples=200, seed=0, noise_table=d["lna_noise_table"])
    for k in ("t_m_k", "ci_low_k", "ci_high_k", "t_m_alt_gamma_k", "t_m_alt_coupler_k",
              "delta_noise_sa_pred_db", "deviation_pct", "lna_extra_noise_k"):
        assert row[k] is not None
    assert row["delta_noise_sa_pred_db"] == pytest.approx(row["delta_noise_sa_meas_db"], abs=0.1)


def test_record_validation():
    with pytest.raises(DomainError):
        MeasurementRecord(0.0, 10, 0.1, -10, -4)
