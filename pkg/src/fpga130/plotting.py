"""Figures written next to the delimited reports (PNG, headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .arch import BITS_PER_WORD, GRID, PAYLOAD_BYTES  # noqa: E402


def _save(fig, path):
    # fixed metadata keeps the PNG bytes stable between runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def wmin_histogram(results, path) -> None:
    """Side-by-side W_min histogram per topology; unroutable trials are left out."""
    by_topo: dict[str, list[int]] = {}
    for r in results:
        by_topo.setdefault(r.topology.value, [])
        if r.w_min is not None:
            by_topo[r.topology.value].append(r.w_min)
    values = [w for ws in by_topo.values() for w in ws] or [1]
    bins = np.arange(min(values), max(values) + 2)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    n = max(len(by_topo), 1)
    width = 0.8 / n
    for i, (topo, ws) in enumerate(by_topo.items()):
        counts, _ = np.histogram(ws, bins=bins)
        ax.bar(bins[:-1] + (i - (n - 1) / 2) * width, counts, width, label=topo)
    ax.set_xlabel("minimum channel width W")
    ax.set_ylabel("instances")
    ax.set_xticks(bins[:-1])
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def config_density(image, path) -> None:
    """Set bits per block over the 19x19 grid."""
    raw = np.frombuffer(image.data, dtype=np.uint8)
    assert raw.size == PAYLOAD_BYTES
    bits = np.unpackbits(raw, bitorder="little").reshape(GRID, GRID, -1).sum(axis=2)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(bits, cmap="viridis", vmin=0, vmax=9 * BITS_PER_WORD)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    ax.set_title("configuration bits set per block")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    _save(fig, path)
