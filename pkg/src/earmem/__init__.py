"""Predicting later memory from encoding-phase EEG with CSP, FBCSP, LDA and a small CNN."""

__version__ = "0.1.0"
