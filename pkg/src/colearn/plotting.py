"""Optional matplotlib renderings of the pipeline's plot-ready tables.

Every ``draw_*`` function fills a figure it is handed; :func:`render` owns
the figure lifecycle and returns PNG bytes.  Only the non-interactive Agg
backend is used.
"""

import io
import math

import numpy as np


def render(draw, *args, size=(7.0, 4.5)):
    import matplotlib
    matplotlib.use("Agg")
    from matplotlib.figure import Figure

    fig = Figure(figsize=size, dpi=100)
    draw(fig, *args)
    fig.tight_layout()
    buf = io.BytesIO()
    # a fixed metadata block keeps repeated renders identical
    fig.savefig(buf, format="png", metadata={"Software": None})
    return buf.getvalue()


def _curve(ax, curve, label):
    ok = curve.count > 0
    centers = 0.5 * (curve.edges[:-1] + curve.edges[1:])
    ax.errorbar(centers[ok], curve.mean[ok], yerr=curve.stderr[ok], marker="o", capsize=3)
    ax.set_xlabel(label)
    ax.set_ylabel("entry probability")


def draw_curves(fig, curves):
    for k, (name, curve) in enumerate(sorted(curves.items())):
        _curve(fig.add_subplot(1, len(curves), k + 1), curve, f"{name} density")


def draw_joint_grid(fig, grid):
    ax = fig.add_subplot(1, 1, 1)
    img = ax.imshow(np.ma.masked_invalid(grid.mean).T, origin="lower", aspect="auto",
                    extent=(grid.x_edges[0], grid.x_edges[-1], grid.y_edges[0], grid.y_edges[-1]),
                    cmap="viridis")
    fig.colorbar(img, ax=ax, label="entry probability")
    ax.set_xlabel("neighbor density")
    ax.set_ylabel("related density")


def draw_similarity_distance(fig, distance, similarity, curve, r):
    ax = fig.add_subplot(1, 1, 1)
    ax.scatter(distance, similarity, s=6, alpha=0.4, color="grey")
    ok = curve.count > 0
    centers = 0.5 * (curve.edges[:-1] + curve.edges[1:])
    ax.plot(centers[ok], curve.mean[ok], marker="o", color="black")
    ax.set_xlabel("geographic distance (km)")
    ax.set_ylabel("industrial similarity")
    ax.set_title(f"r = {r:.3f}")


def draw_space(fig, graph):
    # sectors sit in contiguous arcs of a circle
    n = graph.n_nodes
    angle = 2 * math.pi * np.arange(n) / max(n, 1)
    x, y = np.cos(angle), np.sin(angle)
    ax = fig.add_subplot(1, 1, 1)
    for a, b, _, origin in graph.edges:
        ax.plot([x[a], x[b]], [y[a], y[b]], lw=0.6,
                color="black" if origin != "threshold" else "tab:red", alpha=0.5)
    sectors = sorted({c.sector for c in graph.industries})
    colour = [sectors.index(c.sector) for c in graph.industries]
    sizes = np.asarray(graph.sizes, dtype=float)
    scale = 200.0 / sizes.max() if sizes.max() > 0 else 0.0
    ax.scatter(x, y, s=10 + scale * sizes, c=colour, cmap="tab20", zorder=3)
    ax.set_aspect("equal")
    ax.axis("off")


def draw_event_study(fig, study, group_rows):
    ax = fig.add_subplot(1, 2, 1)
    ax.errorbar(study.years, study.coef, yerr=[study.coef - study.lower, study.upper - study.coef],
                marker="o", capsize=2)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.axvline(study.baseline_year, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("year")
    ax.set_ylabel("treated - control (vs baseline)")
    ax = fig.add_subplot(1, 2, 2)
    years = [r[0] for r in group_rows]
    ax.plot(years, [r[1] for r in group_rows], marker="o", label="treated")
    ax.plot(years, [r[2] for r in group_rows], marker="s", label="control")
    ax.set_xlabel("year")
    ax.set_ylabel("industrial similarity")
    ax.legend()


def draw_did(fig, means, years):
    for k, (name, m) in enumerate(sorted(means.items())):
        ax = fig.add_subplot(1, len(means), k + 1)
        ax.plot(years, [m["treated_before"], m["treated_after"]], marker="o", label="treated")
        ax.plot(years, [m["control_before"], m["control_after"]], marker="s", label="control")
        counterfactual = m["treated_before"] + m["control_after"] - m["control_before"]
        ax.plot(years, [m["treated_before"], counterfactual], ls="--", color="black",
                label="control trend")
        ax.set_title(f"{name}: {m['did']:.4g}")
        ax.set_xticks(list(years))
        ax.legend(fontsize="small")
