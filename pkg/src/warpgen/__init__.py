"""Video generation by warping a generated canonical image with per-frame
deformation fields, plus the propagation applications that fall out of the
explicit content/motion split (editing, point tracking, segmentation).

Everything runs on a small numpy-backed reverse-mode autodiff engine; there
is no framework dependence.
"""

__version__ = "0.1.0"
