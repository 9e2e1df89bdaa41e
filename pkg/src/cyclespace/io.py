"""Reading and writing graphs, trees, coordinates and matrices."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .graphs import Graph


def write_adjacency_csv(g: Graph, path) -> None:
    np.savetxt(path, g.to_adjacency(), fmt="%d", delimiter=",")


def read_adjacency_csv(path) -> Graph:
    a = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    return Graph.from_adjacency(a)


def format_edge_list(n: int, edges) -> str:
    lines = [f"# n={n}"]
    lines += [f"{i} {j}" for i, j in edges]
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g.n, g.edges()))


def parse_edge_list(text: str, n: int | None = None) -> tuple[int, list[tuple[int, int]]]:
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "n" and n is None:
                n = int(val)
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return n, edges


def read_edge_list(path, n: int | None = None) -> Graph:
    n, edges = parse_edge_list(Path(path).read_text(), n)
    return Graph.from_edges(n, edges)


def read_graph(path, n: int | None = None) -> Graph:
    """Adjacency CSV if the file contains commas, edge list otherwise."""
    text = Path(path).read_text()
    if "," in text:
        return read_adjacency_csv(io.StringIO(text))
    n, edges = parse_edge_list(text, n)
    return Graph.from_edges(n, edges)


def write_matrix_csv(a, path, fmt: str = "%.17g") -> None:
    np.savetxt(path, np.asarray(a), fmt=fmt, delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)


def coords_to_string(coords) -> str:
    return "".join("1" if c else "0" for c in coords)


def coords_from_string(s: str) -> np.ndarray:
    s = s.strip()
    if set(s) - {"0", "1"}:
        raise ValueError("coordinates must be a 0/1 string")
    return np.array([c == "1" for c in s], dtype=bool)


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
