"""Conditional GAN toolkit for 2D Ising lattice images.

Modules: ``ising`` (Metropolis simulation), ``psd`` (spectral features and
temperature inversion), ``floatbits`` (float32 bit codec), ``nn`` (numpy
layers, Adam, gradient checks), ``conditioning`` (label embeddings), ``gan``
(training), ``embed_stats`` (neuron activity), ``harness`` (evaluation), and
``cli``.
"""

__version__ = "0.1.0"
