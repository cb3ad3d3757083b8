"""Train a hyperparameter grid of one classifier on a worker pool and majority-vote the results."""

__version__ = "0.1.0"
