"""Rate region and Pareto boundary of the two-user single-beam MIMO interference channel."""

from .channel import ChannelSet, RatePoint, rate_pair, sinr, sinr_angle_form
from .config import load_config, reference_channels
from .keypoints import key_points

__version__ = "0.1.0"

__all__ = [
    "ChannelSet",
    "RatePoint",
    "key_points",
    "load_config",
    "rate_pair",
    "reference_channels",
    "sinr",
    "sinr_angle_form",
]
