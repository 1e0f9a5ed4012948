"""termctl: batch-means output analysis, fixed-volume stopping and
regenerative simulation for Markov chain Monte Carlo."""

__version__ = "0.1.0"
