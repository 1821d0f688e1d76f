"""Error-exponent bounds, confirmation tests, drift checks and scheme simulation
for two-user multiple-access channels with noiseless feedback."""

__version__ = "0.1.0"
