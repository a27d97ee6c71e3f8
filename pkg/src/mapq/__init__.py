"""Tail bounds, dependence control, and Monte Carlo validation for
discrete-time queues with Markov additive arrival and service processes."""

__version__ = "0.1.0"
