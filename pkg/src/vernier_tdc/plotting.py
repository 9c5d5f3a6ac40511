"""SVG figures for the CLI ``--svg`` flag.  Needs matplotlib."""
from __future__ import annotations

import io

import numpy as np


def _render(fig) -> str:
    import matplotlib.pyplot as plt

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "vernier-tdc"
    import matplotlib.pyplot as plt

    return plt.subplots(figsize=(6, 4))


def staircase_svg(curve) -> str:
    fig, ax = _figure()
    ax.step(curve.delta_t / 1000.0, curve.codes, where="post")
    ax.set_xlabel("start-stop interval (ps)")
    ax.set_ylabel("output code")
    ax.grid(True, alpha=0.3)
    return _render(fig)


def histogram_svg(counts, edges) -> str:
    fig, ax = _figure()
    edges = np.asarray(edges)
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge")
    ax.set_xlabel("position error (mm)")
    ax.set_ylabel("events")
    return _render(fig)
