"""Belief-propagation XOR decoding for asynchronous physical-layer network coding."""

from .modulation import BPSK, QPSK, ModScheme, get_scheme
from .channel import ChannelParams, SampleVector, transmit

__all__ = ["BPSK", "QPSK", "ModScheme", "get_scheme", "ChannelParams", "SampleVector", "transmit"]
__version__ = "0.1.0"
