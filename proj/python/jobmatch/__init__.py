"""Maximum likelihood estimation of matching markets with transfers."""

from ._core import (
    BasisSpec,
    ConfigError,
    ConvergenceError,
    Error,
    EstimationReport,
    LinearAlgebraError,
    LogLikelihood,
    Market,
    MatchSample,
    NumericError,
    ParseError,
    RankDeficiencyError,
    Theta,
    __version__,
    build_market,
    draw_sample,
    estimate,
    format_table,
    gini,
    gradient,
    hedonic_vsl,
    linspace_grid,
    log_likelihood,
    report_json,
    risk_cap_counterfactual,
    solve_potentials,
    truth_for_sample,
    vsl,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
