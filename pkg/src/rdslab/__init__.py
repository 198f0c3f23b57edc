"""Monte Carlo laboratory for respondent-driven sampling estimators."""

__version__ = "0.1.0"
