"""Static figures of solved states and trajectories (files only, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .discretization import Grid, integrate  # noqa: E402
from .elliptic import EllipticState  # noqa: E402
from .quasistatic import Trajectory  # noqa: E402

__all__ = ["STYLE", "plot_state", "plot_trajectory"]

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "legend.frameon": False,
    "svg.hashsalt": "thermoqvi",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_state(grid: Grid, state: EllipticState, path) -> Path:
    """1D: temperatures on one axis, mould/membrane/contact on another.
    2D: one image per field."""
    with plt.rc_context(STYLE):
        if grid.dim == 1:
            x = grid.x
            fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
            ax1.plot(x, state.theta1, label=r"$\theta_1$")
            ax1.plot(x, state.theta2, label=r"$\theta_2$")
            ax1.set_ylabel("temperature")
            ax1.legend()
            ax2.plot(x, state.phi, label=r"$\Phi$ (mould)")
            ax2.plot(x, state.u, "--", label="u (membrane)")
            contact = state.chi > 0.5
            if contact.any():
                ax2.plot(x[contact], state.u[contact], "k.", ms=2, label="contact")
            ax2.set_xlabel("x")
            ax2.set_ylabel("displacement")
            ax2.legend()
        else:
            names = [("theta1", r"$\theta_1$"), ("theta2", r"$\theta_2$"),
                     ("phi", r"$\Phi$"), ("u", "u"), ("chi", r"$\chi$")]
            fig, axes = plt.subplots(2, 3, figsize=(10, 6))
            for ax, (name, label) in zip(axes.flat, names):
                img = ax.imshow(grid.reshape(getattr(state, name)).T, origin="lower",
                                extent=(0, 1, 0, 1), cmap="viridis")
                ax.set_title(label)
                ax.grid(False)
                fig.colorbar(img, ax=ax, shrink=0.8)
            gap = grid.reshape(state.phi - state.u).T
            img = axes.flat[5].imshow(gap, origin="lower", extent=(0, 1, 0, 1), cmap="magma")
            axes.flat[5].set_title(r"$\Phi - u$")
            axes.flat[5].grid(False)
            fig.colorbar(img, ax=axes.flat[5], shrink=0.8)
        fig.tight_layout()
        return _save(fig, path)


def plot_trajectory(traj: Trajectory, path) -> Path:
    """Sup norms of the temperatures and the contact fraction against time."""
    t = traj.time.times
    th = [traj.theta(k) for k in range(traj.time.N + 1)]
    n1 = [float(np.max(np.abs(a))) for a, _ in th]
    nd = [float(np.max(np.abs(a - b))) for a, b in th]
    frac = [integrate(traj.grid, s.chi) for s in traj.states]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax1.plot(t, n1, "o-", ms=3, label=r"$\|\theta_1\|_\infty$")
        ax1.plot(t, nd, "s-", ms=3, label=r"$\|\theta_1-\theta_2\|_\infty$")
        ax1.legend()
        ax2.step(t[1:], frac, where="pre")
        ax2.set_ylim(-0.05, 1.05)
        ax2.set_xlabel("t")
        ax2.set_ylabel("contact fraction")
        fig.tight_layout()
        return _save(fig, path)
