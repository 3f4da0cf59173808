"""Pose VAE + depth GAN with a learned shared latent space, desk scale."""

__version__ = "0.1.0"
