"""Attribute guessing game: a questioner policy trained by REINFORCE with
shaped intermediate rewards, playing against a rule-based oracle and an
exact Bayesian guesser, plus evaluation, ablation and human-study tooling."""

__version__ = "0.1.0"

from ._kernels import backend_name

__all__ = ["__version__", "backend_name"]
