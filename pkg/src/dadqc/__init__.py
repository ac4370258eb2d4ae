"""Statevector and dense-operator laboratory for digital-analog-digital
sampling circuits and their IQP targets."""

__version__ = "0.1.0"
