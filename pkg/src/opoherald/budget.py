"""Rate-budget algebra: forward prediction of singles/coincidence rates from
source parameters, and inversion of measured rates into the generated pair
rate and efficiency chain.

Conventions: ``P`` is the generated pair rate, ``B_i = beta_i * P`` the
unpaired background rate on arm ``i``, ``eta_i`` the total survival
probability of arm ``i`` including detection.  Arm 1 is the quantum-jump
side, arm 2 the heralding detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import AnalysisError, InputError


@dataclass(frozen=True)
class BudgetInputs:
    """Measured rates plus the independently known efficiency factors."""

    R1: float                     # s^-1 observed jump rate
    R2: float                     # s^-1 herald detection rate
    C: float                      # s^-1 coincidence rate
    bin_width_dt: float           # s, histogram bin used for the BG check
    beta1: float = 0.0            # arm-1 background fraction (assumed known)
    eta1_factors: dict = field(default_factory=dict)       # name -> fraction
    known_eta2_factors: dict = field(default_factory=dict)  # name -> fraction
    sigma_R1: float = 0.0
    sigma_R2: float = 0.0
    sigma_C: float = 0.0

    def __post_init__(self):
        if min(self.R1, self.R2, self.C) < 0 or self.bin_width_dt <= 0:
            raise InputError("rates must be non-negative and bin_width_dt positive")
        if self.beta1 < 0:
            raise InputError("beta1 must be non-negative")
        for name, v in {**self.eta1_factors, **self.known_eta2_factors}.items():
            if not 0.0 < v <= 1.0:
                raise InputError(f"efficiency factor {name!r}={v} outside (0, 1]")


@dataclass(frozen=True)
class BudgetOutputs:
    """Inferred source parameters and their first-order uncertainties."""

    P: float
    eta1: float
    eta2: float
    beta2: float
    eta_unknown: float
    eta_sat: float
    BG_predicted: float           # counts/s per bin
    P_naive: float                # from R1 and the loss chain alone (no saturation)
    p_definitions_consistent: bool  # naive and saturation-corrected P within 10%
    sigmas: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.P < 0:
            raise AnalysisError("inferred pair rate is negative")
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise AnalysisError(f"inferred {name}={v} is unphysical")


class PredictedRates(NamedTuple):
    R1: float
    R2: float
    C: float
    BG: float


def predict_rates(P: float, beta1: float, beta2: float, eta1: float,
                  eta2: float, dt: float) -> PredictedRates:
    """Forward model: ``R_i = P(1+beta_i) eta_i``, ``C = P eta1 eta2``,
    ``BG = R1 R2 dt``."""
    if P < 0 or min(beta1, beta2) < 0 or not (0 <= eta1 <= 1 and 0 <= eta2 <= 1):
        raise InputError("parameters out of range")
    r1 = P * (1.0 + beta1) * eta1
    r2 = P * (1.0 + beta2) * eta2
    return PredictedRates(r1, r2, P * eta1 * eta2, r1 * r2 * dt)


def eta1_chain(factors) -> float:
    """Product of the named arm-1 efficiency factors."""
    vals = list(factors.values()) if isinstance(factors, dict) else list(factors)
    if not vals:
        raise InputError("empty efficiency chain")
    out = 1.0
    for v in vals:
        if not 0.0 < v <= 1.0:
            raise InputError(f"factor {v} outside (0, 1]")
        out *= v
    return out


def eta_sat(R1: float, R_abs: float) -> float:
    """Saturation efficiency: observed jump rate over raw absorption rate.

    The ion cannot register further absorptions between a jump and the next
    preparation; the resulting dark time acts as an extra efficiency factor.
    """
    if R1 < 0 or R_abs <= 0:
        raise InputError("need R_abs > 0 and R1 >= 0")
    if R1 > R_abs:
        raise InputError("R1 exceeds R_abs; unphysical")
    return R1 / R_abs


def infer_budget(inputs: BudgetInputs, R_abs: float,
                 sigma_R_abs: float = 0.0) -> BudgetOutputs:
    """Invert measured rates into source parameters.

    The pair rate comes from the raw absorption rate and the known arm-1
    losses (the jump rate alone underestimates it because of saturation);
    ``eta2`` then follows from the coincidence rate and ``beta2`` from the
    herald singles rate.
    """
    if R_abs <= 0:
        raise InputError("R_abs must be positive")
    if not inputs.eta1_factors:
        raise InputError("need the known arm-1 efficiency chain")
    sat = eta_sat(inputs.R1, R_abs)
    if sat == 0:
        raise AnalysisError("zero jump rate; saturation efficiency undefined")
    known1 = eta1_chain(inputs.eta1_factors)
    eta1 = known1 * sat
    P = R_abs / known1                      # equivalently R1 / eta1
    P_naive = inputs.R1 / (known1 * (1.0 + inputs.beta1))
    consistent = abs(P_naive - P) <= 0.1 * P
    if inputs.C <= 0:
        raise AnalysisError("zero coincidence rate; eta2 undefined")
    eta2 = inputs.C / (P * eta1)
    beta2 = inputs.R2 / (P * eta2) - 1.0
    known2 = eta1_chain(inputs.known_eta2_factors) if inputs.known_eta2_factors else 1.0
    eta_unknown = eta2 / known2
    bg = inputs.R1 * inputs.R2 * inputs.bin_width_dt

    sigmas = {}
    if sigma_R_abs or inputs.sigma_R1 or inputs.sigma_R2 or inputs.sigma_C:
        rel = lambda s, v: (s / v) ** 2 if v else 0.0
        sigmas["P"] = P * math.sqrt(rel(sigma_R_abs, R_abs))
        sigmas["eta1"] = eta1 * math.sqrt(rel(inputs.sigma_R1, inputs.R1)
                                          + rel(sigma_R_abs, R_abs))
        # P*eta1 = R1 exactly, so eta2 = C/R1
        sigmas["eta2"] = eta2 * math.sqrt(rel(inputs.sigma_C, inputs.C)
                                          + rel(inputs.sigma_R1, inputs.R1))
        sigmas["beta2"] = (1.0 + beta2) * math.sqrt(
            rel(inputs.sigma_R2, inputs.R2) + rel(inputs.sigma_C, inputs.C)
            + rel(inputs.sigma_R1, inputs.R1) + rel(sigma_R_abs, R_abs))
        sigmas["eta_unknown"] = sigmas["eta2"] / known2

    return BudgetOutputs(P=P, eta1=eta1, eta2=eta2, beta2=beta2,
                         eta_unknown=eta_unknown, eta_sat=sat, BG_predicted=bg,
                         P_naive=P_naive, p_definitions_consistent=consistent,
                         sigmas=sigmas)


def pairs_per_mw(P: float, pump_mw: float) -> float:
    """Generated pairs per second and milliwatt of pump power."""
    if not pump_mw > 0:
        raise InputError("pump power must be positive")
    return P / pump_mw


def write_budget_report(outputs: BudgetOutputs, path, pump_mw: float | None = None) -> None:
    """Flat key-value report using the conventional symbol names."""
    lines = [
        f"P_per_s={outputs.P!r}",
        f"eta1={outputs.eta1!r}",
        f"eta2={outputs.eta2!r}",
        f"beta2={outputs.beta2!r}",
        f"eta_sat={outputs.eta_sat!r}",
        f"eta_unknown={outputs.eta_unknown!r}",
        f"BG_per_bin_per_s={outputs.BG_predicted!r}",
        f"P_naive_per_s={outputs.P_naive!r}",
        f"p_definitions_consistent={outputs.p_definitions_consistent}",
    ]
    if pump_mw:
        lines.append(f"pairs_per_s_mW={pairs_per_mw(outputs.P, pump_mw)!r}")
    for name, s in outputs.sigmas.items():
        lines.append(f"sigma_{name}={s!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
