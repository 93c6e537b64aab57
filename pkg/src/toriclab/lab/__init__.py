"""Experiment orchestration: datasets, training, LER evaluation, thresholds and the CLI."""
