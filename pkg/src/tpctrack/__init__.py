"""Active-target TPC toolkit: simulation, featurization, classifiers, labeling."""

__version__ = "0.1.0"
