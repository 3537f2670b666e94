"""Multi-user downlink simulation with a defending IRS and a randomly switching jamming surface."""

__version__ = "0.1.0"

from .scenario import ScenarioConfig, GeometryLayout, build_geometry, desk_profile, paper_profile
from .channels import ChannelSet, draw_channel_set
from .disco import ReflectionVector, aca_variance, jammed_channel
from .precoding import anti_jamming_precoder, effective_channels, sjnr_closed_form, sjnr_monte_carlo
from .manifold import RcgSettings, rcg_optimize, project_discrete
from .harness import BenchmarkId, RateReport, sweep, emit_report

__all__ = [
    "ScenarioConfig", "GeometryLayout", "build_geometry", "desk_profile", "paper_profile",
    "ChannelSet", "draw_channel_set",
    "ReflectionVector", "aca_variance", "jammed_channel",
    "anti_jamming_precoder", "effective_channels", "sjnr_closed_form", "sjnr_monte_carlo",
    "RcgSettings", "rcg_optimize", "project_discrete",
    "BenchmarkId", "RateReport", "sweep", "emit_report",
]
