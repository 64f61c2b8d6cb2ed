#!/usr/bin/env python3
"""
Generate a visual DAG diagram of the width sweep pipeline.
"""

import shutil
from pathlib import Path

from graphviz import Digraph

STAGES = [
    ("GridNode", "GridNode\n(Snapshots + Gram)", "#E8F4F8", "#0277BD"),
    ("WidthNode", "WidthNode\n(Minimax / Packing / POD tail)", "#FFF4E6", "#EF6C00"),
    ("GreedyNode", "GreedyNode\n(Strong Greedy)", "#E8F5E9", "#2E7D32"),
    ("ReportNode", "ReportNode\n(Rows + Decay Fit)", "#F3E5F5", "#7B1FA2"),
]


def build_dag() -> Digraph:
    """The sweep pipeline as a graphviz digraph."""
    dot = Digraph(
        comment="Width Sweep DAG",
        graph_attr={
            "rankdir": "TB",
            "bgcolor": "white",
            "margin": "0.5",
            "fontname": "Arial",
        },
        node_attr={
            "shape": "box",
            "style": "rounded,filled",
            "fontname": "Arial",
            "fontsize": "12",
        },
        edge_attr={
            "fontname": "Arial",
            "fontsize": "10",
        },
    )

    for name, label, fill, border in STAGES:
        dot.node(name, label, fillcolor=fill, color=border)
    dot.node("END", "END", fillcolor="#ECEFF1", color="#455A64", shape="ellipse")

    dot.edge("GridNode", "WidthNode", "grid validated")
    dot.edge("GridNode", "END", "infeasible grid", style="dashed")
    dot.edge("WidthNode", "GreedyNode", "bounds per N")
    dot.edge("GreedyNode", "ReportNode", "greedy errors")
    dot.edge("ReportNode", "END", "report")

    with dot.subgraph(name="cluster_bounds") as c:
        c.attr(label="Bounds", style="dashed", color="#666666")
        c.node("WidthNode")
        c.node("GreedyNode")

    return dot


def generate_dag(output_path: str = "dag.png") -> Path:
    """Render a PNG when the graphviz binary is available, else write the DOT source."""
    dot = build_dag()
    output_file = Path(output_path)
    if output_file.suffix == ".png" and shutil.which("dot"):
        dot.format = "png"
        dot.render(str(output_file.with_suffix("")), cleanup=True)
        return output_file

    source_file = output_file if output_file.suffix in (".dot", ".gv") else output_file.with_suffix(".gv")
    source_file.write_text(dot.source)
    return source_file


def describe_dag() -> str:
    return "\n".join([
        "Nodes:",
        "  1. GridNode - Builds the snapshot grid and its exact Gram matrix",
        "  2. WidthNode - Minimax bounds, packing bounds and POD tails per N",
        "  3. GreedyNode - Strong greedy errors up to the largest N",
        "  4. ReportNode - Collects rows and fits the decay of the upper bounds",
        "  5. END - Terminal node",
        "",
        "Flow:",
        "  GridNode -> WidthNode (or END on an infeasible grid)",
        "  WidthNode -> GreedyNode -> ReportNode -> END",
    ])


if __name__ == "__main__":
    import typer

    def main(output: str = typer.Option("dag.png", "--output", help="Output file path")):
        print(f"DAG diagram saved to: {generate_dag(output)}")
        print()
        print(describe_dag())

    typer.run(main)
