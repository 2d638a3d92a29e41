"""ANOVA simultaneous component analysis for cyclostationary time series."""

__version__ = '1.0.0'
