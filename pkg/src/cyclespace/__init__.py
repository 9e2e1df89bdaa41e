"""Cycle-space priors, G-Wishart marginal likelihoods and MCMC for Gaussian graphical models."""
__version__ = "0.1.0"
