"""The three shipped semiparametric models and their data layer."""

from .cox_cs import CoxCSModel, cs_criterion, cs_profile_nuisance, kkt_residual
from .cox_rc import (
    CoxRCModel,
    breslow_profile,
    cox_rc_criterion,
    cox_rc_profile_criterion,
    efficient_score_cox_rc,
)
from .data import (
    COX_CS,
    COX_RC,
    MODEL_KINDS,
    PARTLY_LINEAR,
    CoxCSData,
    CoxRCData,
    ModelConfig,
    PartlyLinearData,
    censoring_rate_for_fraction,
    event_probability,
    f0_partly_linear,
    generate_data,
    read_csv,
    write_csv,
)
from .partly_linear import PartlyLinearModel, design_matrix, partly_linear_fit


def build_model(config: ModelConfig):
    """Instantiate the model object described by ``config``."""
    if config.kind == COX_RC:
        return CoxRCModel()
    if config.kind == COX_CS:
        return CoxCSModel(config.eps_floor, config.bound_M)
    return PartlyLinearModel(config.spline)


__all__ = [
    "COX_CS",
    "COX_RC",
    "MODEL_KINDS",
    "PARTLY_LINEAR",
    "CoxCSData",
    "CoxCSModel",
    "CoxRCData",
    "CoxRCModel",
    "ModelConfig",
    "PartlyLinearData",
    "PartlyLinearModel",
    "breslow_profile",
    "build_model",
    "censoring_rate_for_fraction",
    "cox_rc_criterion",
    "cox_rc_profile_criterion",
    "cs_criterion",
    "cs_profile_nuisance",
    "design_matrix",
    "efficient_score_cox_rc",
    "event_probability",
    "f0_partly_linear",
    "generate_data",
    "kkt_residual",
    "partly_linear_fit",
    "read_csv",
    "write_csv",
]
