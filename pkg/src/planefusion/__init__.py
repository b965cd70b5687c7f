"""
planefusion: multi-view fusion of per-frame plane detections into an
unconstrained 3D room layout.
"""

__version__ = "0.1.0"
