"""Robust dose-response estimation under outcome contamination.

Submodules: dgp (synthetic generators), nuisance (cross-fitted learners),
smoothers (kernel-local second stages), adrf (curve assembly), metrics,
evt (tail diagnostics), extensions (X-learner, time series), harness
(experiment presets and CLI).
"""

__version__ = "0.1.0"
