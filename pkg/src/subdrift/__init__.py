"""Markov-chain stability certification under state-dependent subsampling."""
__version__ = "0.1.0"
