"""Pure-numpy pixel kernels (fallback when the compiled extension is absent).

Both backends must agree bit-for-bit: the threshold test uses the raw
float difference, and rounding is round-half-to-even (np.rint / C llrint).
"""

import numpy as np

BACKEND = "numpy"


def highpass_image(frame, bg, tau):
    """Thresholded residual frame - bg as uint8; values <= tau map to 0."""
    diff = frame.astype(np.float64) - bg
    out = np.where(diff > tau, np.rint(diff), 0.0)
    return out.astype(np.uint8)


def highpass_sum(frame, bg, tau):
    """Fused residual + threshold + sum; returns (density, active_pixels)."""
    diff = frame.astype(np.float64) - bg
    mask = diff > tau
    d = int(np.rint(diff[mask]).sum())
    return d, int(mask.sum())
