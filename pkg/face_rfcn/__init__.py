"""
Face R-FCN - region-based face detection kernels and a desk-scale training pipeline.
"""
__version__ = "0.1.0"
