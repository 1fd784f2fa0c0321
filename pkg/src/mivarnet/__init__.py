"""Motion-informed unrolled MRI reconstruction with motion detection."""

__version__ = "0.1.0"
