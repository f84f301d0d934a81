"""Mixed fractional Brownian motion: spectra and small-ball probabilities."""
