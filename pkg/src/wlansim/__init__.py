"""Event-driven 802.11 channel-access simulator with online channel/CW learning."""

__version__ = "0.1.0"
