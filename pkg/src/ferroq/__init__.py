"""ferroq: analysis toolkit for tunable ferroelectric (BTO) acoustic resonators.

Equivalent-circuit (mBVD) fitting, a 1D coupled piezoelectric forward model,
bias-dependent material extraction, sweep analytics and delay-line loss
extraction.
"""
__version__ = "0.1.0"
