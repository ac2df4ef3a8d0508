import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opoherald import (AnalysisError, BudgetInputs, InputError, eta1_chain, eta_sat,
                       infer_budget, pairs_per_mw, predict_rates)
from opoherald.figures import sig_round

PAPER_INPUTS = BudgetInputs(
    R1=111.0, R2=136_000.0, C=0.9, bin_width_dt=13e-6,
    eta1_factors={"smf": 0.27, "fbs": 0.5, "ion": 0.002},
    known_eta2_factors={"opo_sspd": 0.2, "sspd": 0.25},
)


class TestPredictRates:
    def test_measured_operating_point(self):
        out = predict_rates(P=2.52e6, beta1=0.0, beta2=5.7, eta1=4.4e-5,
                            eta2=8.1e-3, dt=13e-6)
        assert out.R2 == pytest.approx(1.368e5, rel=2e-3)
        assert out.C == pytest.approx(0.90, abs=0.01)
        assert out.BG == pytest.approx(out.R1 * out.R2 * 13e-6)

    def test_zero_pairs(self):
        out = predict_rates(0.0, 0.0, 0.0, 0.5, 0.5, 1e-6)
        assert out == (0.0, 0.0, 0.0, 0.0)

    def test_range_validation(self):
        with pytest.raises(InputError):
            predict_rates(1.0, 0.0, 0.0, 1.5, 0.5, 1e-6)


class TestEta1Chain:
    def test_measured_chain(self):
        assert eta1_chain({"smf": 0.27, "fbs": 0.5, "ion": 0.002, "sat": 0.163}) == \
            pytest.approx(4.4e-5, rel=2e-2)

    def test_single_factor(self):
        assert eta1_chain([0.42]) == 0.42

    def test_trap_availability(self):
        # photons surviving to the trap per generated pair
        assert eta1_chain({"smf": 0.27, "fbs": 0.5}) == pytest.approx(0.135)
        assert 2.52e6 * 0.135 == pytest.approx(3.4e5, rel=1e-2)

    def test_empty_chain_rejected(self):
        with pytest.raises(InputError):
            eta1_chain({})

    def test_out_of_range_rejected(self):
        with pytest.raises(InputError):
            eta1_chain([0.5, 1.2])


class TestEtaSat:
    def test_measured_value(self):
        assert eta_sat(111.0, 680.0) == pytest.approx(0.1632, abs=1e-3)

    def test_no_saturation(self):
        assert eta_sat(42.0, 42.0) == 1.0

    def test_zero_jump_rate(self):
        assert eta_sat(0.0, 680.0) == 0.0

    def test_unphysical_rejected(self):
        with pytest.raises(InputError):
            eta_sat(700.0, 680.0)


class TestInferBudget:
    def test_measured_inputs_reproduce_table(self):
        out = infer_budget(PAPER_INPUTS, R_abs=680.0)
        assert sig_round(out.P) == sig_round(2.52e6)
        assert sig_round(out.eta1) == sig_round(4.4e-5)
        assert sig_round(out.eta2) == sig_round(8.1e-3)
        assert sig_round(out.beta2) == sig_round(5.7)
        assert sig_round(out.eta_unknown) == sig_round(0.16)
        assert sig_round(out.eta_sat) == sig_round(0.163)
        assert sig_round(pairs_per_mw(out.P, 300.0)) == sig_round(8400.0)

    def test_identity_chain(self):
        inputs = BudgetInputs(R1=5.0, R2=5.0, C=5.0, bin_width_dt=1e-6,
                              eta1_factors={"all": 1.0})
        out = infer_budget(inputs, R_abs=5.0)
        assert out.P == pytest.approx(5.0)
        assert out.beta2 == pytest.approx(0.0, abs=1e-12)
        assert out.eta2 == pytest.approx(1.0)

    def test_saturation_flag_on_measured_inputs(self):
        out = infer_budget(PAPER_INPUTS, R_abs=680.0)
        # naive inversion from R1 alone ignores the post-jump dark time
        assert not out.p_definitions_consistent
        assert out.P_naive < 0.2 * out.P

    def test_zero_coincidences_rejected(self):
        inputs = BudgetInputs(R1=10.0, R2=10.0, C=0.0, bin_width_dt=1e-6,
                              eta1_factors={"a": 0.5})
        with pytest.raises(AnalysisError):
            infer_budget(inputs, R_abs=20.0)

    def test_uncertainty_propagation(self):
        inputs = BudgetInputs(R1=111.0, R2=136_000.0, C=0.9, bin_width_dt=13e-6,
                              eta1_factors={"smf": 0.27, "fbs": 0.5, "ion": 0.002},
                              known_eta2_factors={"opo_sspd": 0.2, "sspd": 0.25},
                              sigma_R1=1.0, sigma_R2=500.0, sigma_C=0.09)
        out = infer_budget(inputs, R_abs=680.0, sigma_R_abs=20.0)
        assert out.sigmas["P"] == pytest.approx(out.P * 20.0 / 680.0)
        assert out.sigmas["eta2"] == pytest.approx(
            out.eta2 * math.hypot(0.09 / 0.9, 1.0 / 111.0))

    @given(st.floats(1e4, 1e8), st.floats(0.0, 10.0), st.floats(1e-6, 0.9),
           st.floats(1e-6, 0.9), st.floats(0.02, 1.0))
    @settings(max_examples=300, deadline=None)
    def test_forward_inverse_roundtrip(self, p, beta2, eta1_known, eta2, sat):
        """predict_rates then infer_budget returns the parameters to 1e-12."""
        eta1 = eta1_known * sat
        rates = predict_rates(p, 0.0, beta2, eta1, eta2, 1e-6)
        r_abs = rates.R1 / sat
        inputs = BudgetInputs(R1=rates.R1, R2=rates.R2, C=rates.C,
                              bin_width_dt=1e-6, eta1_factors={"k": eta1_known})
        out = infer_budget(inputs, R_abs=r_abs)
        assert out.P == pytest.approx(p, rel=1e-12)
        assert out.eta1 == pytest.approx(eta1, rel=1e-12)
        assert out.eta2 == pytest.approx(eta2, rel=1e-12)
        assert out.beta2 == pytest.approx(beta2, rel=1e-9, abs=1e-9)

    def test_beta_scale_invariance(self):
        """Scaling P and both backgrounds by a constant leaves beta2 fixed."""
        for scale in (1.0, 3.7):
            rates = predict_rates(1e6 * scale, 0.0, 4.2, 1e-4, 5e-3, 1e-6)
            inputs = BudgetInputs(R1=rates.R1, R2=rates.R2, C=rates.C,
                                  bin_width_dt=1e-6, eta1_factors={"k": 2e-4})
            out = infer_budget(inputs, R_abs=rates.R1 / 0.5)
            assert out.beta2 == pytest.approx(4.2, rel=1e-9)


class TestReportFile:
    def test_flat_key_value_format(self, tmp_path):
        from opoherald.budget import write_budget_report

        out = infer_budget(PAPER_INPUTS, R_abs=680.0)
        path = tmp_path / "budget.txt"
        write_budget_report(out, path, pump_mw=300.0)
        text = path.read_text()
        assert "P_per_s=" in text and "beta2=" in text and "eta_sat=" in text
        values = dict(line.split("=", 1) for line in text.strip().splitlines())
        assert float(values["P_per_s"]) == pytest.approx(2.52e6, rel=1e-2)
