"""Static SVG renderings of the CE-plane and the acceptability curve.

Needs matplotlib (``pip install artifact[plots]``); everything quantitative
is also written as CSV, so the plots are optional.
"""

from __future__ import annotations

import io

from .cea import AteDraws, CeacCurve


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "bartcea"
    import matplotlib.pyplot as plt

    return plt


def _to_svg(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def ce_plane_svg(draws: AteDraws, xlim=(-0.05, 0.15), ylim=(0.0, 1000.0)) -> bytes:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(draws.delta_q, draws.delta_c, s=2, alpha=0.3, color="black")
    ax.scatter([draws.delta_q.mean()], [draws.delta_c.mean()], s=20, color="red")
    ax.axvline(0, linestyle="--", color="grey")
    ax.axhline(0, linestyle="--", color="grey")
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_xlabel("delta_q")
    ax.set_ylabel("delta_c")
    out = _to_svg(fig)
    plt.close(fig)
    return out


def ceac_svg(curve: CeacCurve) -> bytes:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(curve.lam, curve.p, color="black")
    ax.set_ylim(0, 1)
    ax.set_xlabel("willingness to pay")
    ax.set_ylabel("probability of cost-effectiveness")
    out = _to_svg(fig)
    plt.close(fig)
    return out
