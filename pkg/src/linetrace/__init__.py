"""Vision-based line following: HSV line detection, Kalman-filtered centroid
tracking, a bang-bang navigation law and a deterministic synthetic world to
fly it in."""

__version__ = "0.1.0"
