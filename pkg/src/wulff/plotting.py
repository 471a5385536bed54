"""SVG figures for the CLI reports.

Output is byte-stable: the SVG hash salt is fixed and the date stamp dropped.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .radial import beta_function  # noqa: E402

STYLE = {
    "svg.hashsalt": "wulff",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": (5.0, 3.4),
    "axes.prop_cycle": matplotlib.cycler(color=["#08589e", "#2b8cbe", "#4eb3d3", "#7bccc4", "#a8ddb5"]),
}


def _save(fig, path, deterministic=True):
    meta = {"Date": None} if deterministic else {}
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    return str(path)


def overlay_svg(path, s, u_profiles, v_profile, logx=True, deterministic=True, slack=None):
    """u_eps* curves against v* on a shared s grid."""
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots()
        vv = v_profile(s)
        ax.plot(s, vv, color="k", lw=1.6, label=r"$v^*$")
        if slack:
            ax.plot(s, vv + slack, color="k", lw=0.6, ls=":", label=r"$v^* + C h^{1/2}$")
        for label, prof in u_profiles.items():
            ax.plot(s, prof(s), label=label)
        if logx:
            ax.set_xscale("log")
        top = np.nanmax(np.concatenate([prof(s) for prof in u_profiles.values()] + [np.zeros(1)]))
        ax.set_ylim(0.0, 1.6 * top if top > 0 else 1.0)
        ax.set_xlabel("$s$")
        ax.set_ylabel("rearrangement")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path, deterministic)


def beta_svg(path, params, deterministic=True):
    """F(beta) with the admissible root marked."""
    from .radial import solve_beta

    N, g = params.N, params.gamma
    bmax = params.beta_max
    b = np.linspace(0.0, 1.3 * (N - g) / (g - 1), 400)
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(b, beta_function(b, N, g), color="#08589e")
        ax.axhline(params.lam / params.c_gamma, color="0.4", lw=0.8, ls="--")
        ax.axvline(bmax, color="0.6", lw=0.6, ls=":")
        if params.lam < params.lam_max:
            beta = solve_beta(params)
            ax.plot([beta], [params.lam / params.c_gamma], "o", color="#2b8cbe")
        ax.set_xlabel(r"$\beta$")
        ax.set_ylabel(r"$F(\beta)$")
        ax.set_ylim(bottom=0.0)
        fig.tight_layout()
        return _save(fig, path, deterministic)
