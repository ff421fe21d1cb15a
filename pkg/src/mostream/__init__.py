"""Magnitude-orientation motion-stream pipeline.

Dense TV-L1 optical flow, byte-coded magnitude/orientation images, stacked
network input volumes, crop/flip augmentation, a desk-scale convolutional
classifier, and late score fusion, plus the file formats and CLI that chain
the stages together.
"""

__version__ = "0.1.0"
