"""Numerical toolkit for identification in random-coefficients models.

Submodules
----------
momentseq     determinacy criteria for moment sequences
uniqueness    sets of uniqueness for polynomial and (quasi-)analytic classes
rc_linear     moment-system recovery for linear random-coefficients models
riesz_basis   exponential systems with perturbed frequencies
deconv_panel  characteristic-function deconvolution and panel recovery
sphere_bc     hemispherical transform and binary-choice inversion
harness       configuration, simulation and the command-line interface
"""

__version__ = "0.1.0"
