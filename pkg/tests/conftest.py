import numpy as np
from scipy.ndimage import gaussian_filter

from mostream.raster import bilinear_map, make_rng


def smooth_texture(seed, h, w, sigma=1.5):
    """Seeded smoothed-noise texture scaled to [0, 255]."""
    tex = gaussian_filter(make_rng(seed).standard_normal((h, w)), sigma, mode="wrap")
    tex -= tex.min()
    return tex * (255.0 / tex.max())


def shift_image(img, dx, dy):
    """Translate image content by (dx, dy) with clamp borders."""
    h, w = img.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    return bilinear_map(img, xs - dx, ys - dy)


def interior_mask(h, w, fraction=0.8):
    """Boolean mask selecting the central fraction of the raster."""
    my = int(round(h * (1.0 - fraction) / 2.0))
    mx = int(round(w * (1.0 - fraction) / 2.0))
    mask = np.zeros((h, w), dtype=bool)
    mask[my : h - my, mx : w - mx] = True
    return mask


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call":
                continue
            if "test_acceptance.py" in report.nodeid:
                name = report.nodeid.split("::")[-1]
                lines.append((name, "PASS" if status == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"[{verdict}] {name}")
