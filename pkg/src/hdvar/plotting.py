"""Histogram, Gaussian kernel density, and a dependency-free SVG rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.total * np.diff(self.edges))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def histogram(values, bins: int = 30) -> Histogram:
    """Equal-width bins over [min, max] (numpy widens a zero-width range)."""
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return Histogram(edges, counts)


def silverman_bandwidth(values) -> float:
    """0.9 * min(sd, IQR / 1.34) * N^(-1/5), falling back to sd if IQR is 0."""
    x = np.asarray(values, dtype=np.float64)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    if spread == 0:
        spread = max(abs(float(x.mean())), 1.0) * 1e-3
    return 0.9 * spread * x.size ** (-0.2)


def gaussian_kde(values, at, bandwidth: float | None = None) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    u = (np.asarray(at, dtype=np.float64)[:, None] - x[None, :]) / h
    return np.exp(-0.5 * u * u).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))


def _tick(v: float) -> str:
    return f"{v:.3f}"


def histogram_svg(values, hist: Histogram, title: str = "", xlabel: str = "",
                  width: int = 720, height: int = 440) -> str:
    """Bar histogram on the density scale with a red KDE curve on top."""
    left, right, top, bottom = 70, 20, 40, 80
    plot_w, plot_h = width - left - right, height - top - bottom
    x0, x1 = float(hist.edges[0]), float(hist.edges[-1])
    grid = np.linspace(x0, x1, 200)
    kde = gaussian_kde(values, grid)
    dens = hist.density
    ymax = max(float(dens.max()), float(kde.max())) * 1.05 or 1.0

    def sx(v):
        return left + (v - x0) / (x1 - x0) * plot_w

    def sy(v):
        return top + plot_h - v / ymax * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for lo, hi, d in zip(hist.edges[:-1], hist.edges[1:], dens):
        y = sy(d)
        out.append(f'<rect x="{sx(lo):.2f}" y="{y:.2f}" width="{sx(hi) - sx(lo):.2f}" '
                   f'height="{top + plot_h - y:.2f}" fill="#b0c4de" stroke="#4a6a8a" stroke-width="0.5"/>')
    path = " ".join(f"{'M' if i == 0 else 'L'}{sx(g):.2f},{sy(k):.2f}" for i, (g, k) in enumerate(zip(grid, kde)))
    out.append(f'<path d="{path}" fill="none" stroke="red" stroke-width="1.5"/>')

    base = top + plot_h
    out.append(f'<line x1="{left}" y1="{base}" x2="{left + plot_w}" y2="{base}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>')
    step = max(1, len(hist.edges) // 10)
    for e in hist.edges[::step]:
        x = sx(e)
        out.append(f'<line x1="{x:.2f}" y1="{base}" x2="{x:.2f}" y2="{base + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{base + 18}" text-anchor="end" '
                   f'transform="rotate(-35 {x:.2f} {base + 18})">{_tick(e)}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = frac * ymax
        y = sy(v)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">density</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
