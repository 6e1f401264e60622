"""Statistical model checking of BLTLc formulas on reaction-network CTMCs."""

__version__ = "0.1.0"
