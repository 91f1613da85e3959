"""counselqa: counselling QA corpus, modelling, evaluation, and serving toolkit."""

__version__ = "0.1.0"
