"""Functional simulator for DNN training on resistive crossbars."""

__version__ = "0.1.0"
