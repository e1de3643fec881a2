"""
SVG rendering of the transition-time sweep.
"""

import io
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from data.models import SweepRow  # noqa: E402

SVG_HASH_SALT = "speedlimits"


def render_sweep_svg(rows: Sequence[SweepRow]) -> str:
    """
    Log-x plot of tau24 (dashed), tau25 (dotted) and the actual duration (solid).

    Failed points are drawn as gaps. Output is byte-stable for identical rows.
    """
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    x = np.array([r.gamma_over_m for r in rows])
    tau24 = np.array([r.tau24 for r in rows])
    tau25 = np.array([r.tau25 for r in rows])
    tau = np.array([r.tau_actual for r in rows])

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(x, tau24, linestyle="--", marker="o", markersize=3, label=r"$\tau_{24}$")
    ax.plot(x, tau25, linestyle=":", marker="s", markersize=3, label=r"$\tau_{25}$")
    ax.plot(x, tau, linestyle="-", color="black", label=r"$\tau$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\gamma/m$ [1/s]")
    ax.set_ylabel("transition time [s]")
    ax.legend()
    fig.tight_layout()

    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()
