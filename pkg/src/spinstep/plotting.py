"""Quick-look figures written next to the delimited output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rc("font", size=9)
plt.rc("lines", linewidth=1.0, markersize=2)
plt.rc("svg", hashsalt="spinstep")


def _sphere_axes(fig):
    ax = fig.add_subplot(projection="3d")
    u, v = np.mgrid[0:2 * np.pi:40j, 0:np.pi:20j]
    ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
                      color="0.85", linewidth=0.3)
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlabel("$s_1$")
    ax.set_ylabel("$s_2$")
    ax.set_zlabel("$s_3$")
    return ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def plot_sphere_orbits(orbits: dict, path, title=""):
    """Single-spin trajectories on the unit sphere.

    ``orbits`` maps a label to an ``(n, 3)`` array.  Labels starting with
    ``classical`` are drawn as dots, everything else as lines.
    """
    fig = plt.figure(figsize=(4.5, 4.5))
    ax = _sphere_axes(fig)
    for label, pts in orbits.items():
        pts = np.asarray(pts)
        if label.startswith("classical"):
            ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], ".", markersize=1, label=label)
        else:
            ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], "-", linewidth=1.2, label=label)
    if 1 < len(orbits) <= 4:
        ax.legend(loc="upper left", fontsize=7)
    ax.set_title(title)
    _save(fig, path)


def plot_energy_error(times, series: dict, path, title=""):
    """``|H(s_n) - H(s_0)|`` against time for one or more methods."""
    fig, ax = plt.subplots(figsize=(5, 3))
    for label, err in series.items():
        ax.plot(times, err, label=label)
    ax.set_xlabel("time")
    ax.set_ylabel(r"$|H(s_n) - H(s_0)|$")
    ax.ticklabel_format(axis="y", style="sci", scilimits=(-2, -2))
    ax.legend(frameon=False)
    ax.set_title(title)
    _save(fig, path)


def plot_section(points, path, title=""):
    """Poincare section points on the sphere; ``points`` has shape ``(seeds, periods, 3)``."""
    fig = plt.figure(figsize=(5, 5))
    ax = _sphere_axes(fig)
    for orbit in np.asarray(points):
        ax.scatter(orbit[:, 0], orbit[:, 1], orbit[:, 2], s=1.5, linewidths=0, depthshade=False)
    ax.view_init(elev=20, azim=-60)
    ax.set_title(title)
    _save(fig, path)
