"""Conditional-GAN laboratory with word-level attention and a diversity
bottleneck, built on a small numpy autodiff engine."""

__version__ = "0.1.0"
