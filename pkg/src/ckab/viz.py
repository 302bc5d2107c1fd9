"""Figure rendering of a transition system.

States are laid out in breadth-first layers from the initial state: solid
circles for stable states, dashed for intermediate ones, labelled with the
context assignment and the fact count.
"""

from __future__ import annotations

from collections import deque

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from .statespace import Phase, TransitionSystem  # noqa: E402


def _layers(ts: TransitionSystem) -> dict[str, tuple[int, int]]:
    depth = {ts.initial: 0}
    order = deque([ts.initial])
    succ: dict[str, list[str]] = {}
    for src, dst in sorted(ts.edges):
        succ.setdefault(src, []).append(dst)
    while order:
        node = order.popleft()
        for nxt in succ.get(node, ()):
            if nxt not in depth:
                depth[nxt] = depth[node] + 1
                order.append(nxt)
    # anything unreachable goes into one trailing layer
    tail = (max(depth.values()) + 1) if depth else 0
    for state_id in ts.states:
        depth.setdefault(state_id, tail)
    positions: dict[str, tuple[int, int]] = {}
    counters: dict[int, int] = {}
    for state_id in ts.states:
        d = depth[state_id]
        positions[state_id] = (d, counters.get(d, 0))
        counters[d] = counters.get(d, 0) + 1
    return positions


def render_transition_system(ts: TransitionSystem, path: str,
                             max_labels: int = 60) -> None:
    """Write a PNG of the state graph to ``path``."""
    positions = _layers(ts)
    xs = [p[0] for p in positions.values()] or [0]
    ys = [p[1] for p in positions.values()] or [0]
    width = max(6.0, 1.6 * (max(xs) + 1))
    height = max(4.0, 0.55 * (max(ys) + 1))
    fig, ax = plt.subplots(figsize=(min(width, 40), min(height, 40)))
    for src, dst in sorted(ts.edges):
        x1, y1 = positions[src]
        x2, y2 = positions[dst]
        ax.annotate("", xy=(x2, y2), xytext=(x1, y1),
                    arrowprops=dict(arrowstyle="->", color="0.55", lw=0.7,
                                    shrinkA=8, shrinkB=8))
    label_all = len(ts.states) <= max_labels
    for state_id, (x, y) in positions.items():
        state = ts.states[state_id]
        stable = state.phase is Phase.STABLE
        face = "#cfe8ff" if stable else "white"
        ax.scatter([x], [y], s=180, zorder=3, facecolor=face,
                   edgecolor="black",
                   linestyle="-" if stable else "--",
                   linewidths=1.6 if state_id == ts.initial else 0.9)
        if label_all:
            ax.annotate(f"{state.ctx}\n|A|={len(state.abox)}", (x, y),
                        textcoords="offset points", xytext=(0, 9),
                        ha="center", fontsize=5.5)
    handles = [
        mpatches.Patch(facecolor="#cfe8ff", edgecolor="black", label="stable"),
        mpatches.Patch(facecolor="white", edgecolor="black",
                       linestyle="--", label="intermediate"),
    ]
    ax.legend(handles=handles, loc="upper left", fontsize=7)
    ax.set_title(f"{ts.stats.state_count} states, {ts.stats.edge_count} "
                 "transitions", fontsize=9)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
