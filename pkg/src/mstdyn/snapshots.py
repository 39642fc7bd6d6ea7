"""Frame export for visual inspection of the tree movie.

Each frame can be rendered to DOT (default) or GraphML with the movie
conventions: node size proportional to degree, the top-ranked vertices in
distinct colors, edges that appeared this frame in red and edges that will
disappear next frame dashed black. Output is byte-stable for a fixed
input.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corrnet import TreeFrame
from .observables import _rank_order

__all__ = ["FrameDiff", "diff_frames", "export_dot", "export_graphml"]

#: palette for the top-ranked vertices (13 by default, one per rank)
PALETTE = (
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4",
    "#46f0f0", "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff",
    "#9a6324", "#fffac8", "#800000", "#aaffc3",
)


@dataclass(frozen=True)
class FrameDiff:
    """Edge turnover around one frame.

    ``attached``: edges present now but not in the previous frame;
    ``to_detach``: edges present now but gone in the next frame. The two
    sets may overlap (one-frame-lived edges). At stream boundaries the
    undefined side is empty and flagged.
    """

    attached: frozenset[tuple[int, int]]
    to_detach: frozenset[tuple[int, int]]
    first_frame: bool = False
    last_frame: bool = False


def _edge_keys(frame: TreeFrame) -> frozenset[tuple[int, int]]:
    return frozenset(zip(frame.edge_i.tolist(), frame.edge_j.tolist()))


def diff_frames(prev: TreeFrame | None, cur: TreeFrame,
                nxt: TreeFrame | None) -> FrameDiff:
    """Set differences of canonical (min, max) edge keys around ``cur``."""
    cur_keys = _edge_keys(cur)
    attached = frozenset() if prev is None else cur_keys - _edge_keys(prev)
    to_detach = frozenset() if nxt is None else cur_keys - _edge_keys(nxt)
    return FrameDiff(attached, to_detach, prev is None, nxt is None)


def _top_colors(frame: TreeFrame, ranks, top: int) -> dict[int, str]:
    if ranks is None:
        ranks = _rank_order(frame)
    chosen = list(ranks)[:min(top, len(PALETTE), frame.n)]
    return {int(v): PALETTE[pos] for pos, v in enumerate(chosen)}


def export_dot(frame: TreeFrame, diff: FrameDiff | None = None, ranks=None,
               top: int = 13) -> str:
    """DOT document for one frame.

    Node width encodes the degree (0.1 per edge); the ``top`` ranked
    vertices carry palette colors, everything else is gray. Attached edges
    are red; edges about to detach are dashed (black unless also attached).
    Attribute order is fixed, so identical inputs give identical bytes.
    """
    colors = _top_colors(frame, ranks, top)
    attached = diff.attached if diff is not None else frozenset()
    to_detach = diff.to_detach if diff is not None else frozenset()
    lines = [f"graph frame_{frame.frame_index} {{"]
    lines.append(f'  graph [frame={frame.frame_index}, center_date="{frame.center_date}"];')
    lines.append('  node [shape=circle, style=filled, fixedsize=true, color="#bbbbbb"];')
    for v in range(frame.n):
        width = 0.1 * int(frame.degree[v])
        attrs = [f'label="{frame.tickers[v]}"', f"width={width:.2f}"]
        if v in colors:
            attrs.append(f'color="{colors[v]}"')
        lines.append(f"  n{v} [{', '.join(attrs)}];")
    for i, j, d in zip(frame.edge_i.tolist(), frame.edge_j.tolist(),
                       frame.edge_dist.tolist()):
        key = (i, j)
        attrs = [f'dist="{d:.6f}"']
        if key in attached:
            attrs.append('color="red"')
        elif key in to_detach:
            attrs.append('color="black"')
        if key in to_detach:
            attrs.append("style=dashed")
        lines.append(f"  n{i} -- n{j} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graphml(frame: TreeFrame, diff: FrameDiff | None = None, ranks=None,
                   top: int = 13) -> str:
    """GraphML twin of export_dot (same attributes, same determinism)."""
    colors = _top_colors(frame, ranks, top)
    attached = diff.attached if diff is not None else frozenset()
    to_detach = diff.to_detach if diff is not None else frozenset()
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key id="label" for="node" attr.name="label" attr.type="string"/>',
        '  <key id="degree" for="node" attr.name="degree" attr.type="int"/>',
        '  <key id="color" for="node" attr.name="color" attr.type="string"/>',
        '  <key id="dist" for="edge" attr.name="dist" attr.type="double"/>',
        '  <key id="status" for="edge" attr.name="status" attr.type="string"/>',
        f'  <graph id="frame_{frame.frame_index}" edgedefault="undirected">',
    ]
    for v in range(frame.n):
        out.append(f'    <node id="n{v}">')
        out.append(f'      <data key="label">{frame.tickers[v]}</data>')
        out.append(f'      <data key="degree">{int(frame.degree[v])}</data>')
        if v in colors:
            out.append(f'      <data key="color">{colors[v]}</data>')
        out.append("    </node>")
    for i, j, d in zip(frame.edge_i.tolist(), frame.edge_j.tolist(),
                       frame.edge_dist.tolist()):
        key = (i, j)
        status = []
        if key in attached:
            status.append("attached")
        if key in to_detach:
            status.append("to_detach")
        out.append(f'    <edge source="n{i}" target="n{j}">')
        out.append(f'      <data key="dist">{d:.6f}</data>')
        if status:
            out.append(f'      <data key="status">{"+".join(status)}</data>')
        out.append("    </edge>")
    out.append("  </graph>")
    out.append("</graphml>")
    return "\n".join(out) + "\n"
