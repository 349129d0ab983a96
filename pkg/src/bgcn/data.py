"""Citation dataset ingest, canonical storage and random splits."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._container import read_container, write_container
from .graph import SparseGraph, build_graph

DATASET_MAGIC = b"BGCN"
DATASET_VERSION = 1
DATA_DIR_ENV = "BGCN_DATA_DIR"
DEFAULT_VAL_SIZE = 500
DEFAULT_TEST_SIZE = 1000

EXPECTED_SHAPES = {  # name -> (n, d, K)
    "cora": (2708, 1433, 7),
    "citeseer": (3312, 3703, 6),
    "pubmed": (19717, 500, 3),
}


class DatasetError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    node_ids: list[str]
    name: str = ""
    class_names: list[str] = field(default_factory=list)
    skipped_edges: int = 0

    def __post_init__(self):
        n = self.graph.n
        if self.features.shape[0] != n or self.labels.shape != (n,) or len(self.node_ids) != n:
            raise DatasetError("features, labels and node ids must all have one entry per node")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError("label outside [0, num_classes)")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def stats(self) -> dict:
        return {"name": self.name, "n": self.n, "d": self.num_features, "K": self.num_classes,
                "edges": self.graph.num_edges, "skipped_edges": self.skipped_edges}

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.graph == other.graph and self.num_classes == other.num_classes
                and self.node_ids == other.node_ids and self.name == other.name
                and self.class_names == other.class_names
                and self.skipped_edges == other.skipped_edges
                and np.array_equal(self.labels, other.labels)
                and self.features.dtype == other.features.dtype
                and self.features.tobytes() == other.features.tobytes())


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    labels_per_class: int
    seed: int

    def __eq__(self, other):
        if not isinstance(other, Split):
            return NotImplemented
        return (self.labels_per_class == other.labels_per_class and self.seed == other.seed
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("train_idx", "val_idx", "test_idx")))


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if line:
                yield lineno, line


def _assemble(name, ids, feats, label_strs, edge_pairs, skipped) -> Dataset:
    class_names: list[str] = []
    lookup: dict[str, int] = {}
    labels = np.empty(len(ids), dtype=np.int64)
    for i, c in enumerate(label_strs):
        if c not in lookup:
            lookup[c] = len(class_names)
            class_names.append(c)
        labels[i] = lookup[c]
    features = np.asarray(feats, dtype=np.float64).reshape(len(ids), -1)
    g = build_graph(np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2), len(ids))
    return Dataset(g, features, labels, len(class_names), list(ids), name, class_names, skipped)


def load_content_cites(content_path, cites_path, name: str | None = None) -> Dataset:
    """Parse the Cora/Citeseer ``.content`` + ``.cites`` pair.

    Nodes keep content-file order; classes are numbered by first appearance.
    Citations naming an unknown paper are skipped and counted in
    ``Dataset.skipped_edges``.
    """
    ids, feats, labels = [], [], []
    seen = set()
    width = None
    for lineno, line in _read_lines(content_path):
        parts = line.split()
        if len(parts) < 3:
            raise DatasetError(f"{content_path}:{lineno}: expected id, features and label")
        if width is None:
            width = len(parts) - 2
        elif len(parts) - 2 != width:
            raise DatasetError(f"{content_path}:{lineno}: {len(parts) - 2} features, "
                               f"earlier lines have {width}")
        if parts[0] in seen:
            raise DatasetError(f"{content_path}:{lineno}: duplicate paper id {parts[0]!r}")
        try:
            row = [float(v) for v in parts[1:-1]]
        except ValueError as exc:
            raise DatasetError(f"{content_path}:{lineno}: {exc}") from None
        seen.add(parts[0])
        ids.append(parts[0])
        feats.append(row)
        labels.append(parts[-1])
    index = {s: i for i, s in enumerate(ids)}
    edges, skipped = [], 0
    for lineno, line in _read_lines(cites_path):
        parts = line.split()
        if len(parts) != 2:
            raise DatasetError(f"{cites_path}:{lineno}: expected '<cited>\\t<citing>'")
        a, b = index.get(parts[0]), index.get(parts[1])
        if a is None or b is None:
            skipped += 1
            continue
        edges.append((a, b))
    name = name or Path(content_path).stem.lower()
    return _assemble(name, ids, feats, labels, edges, skipped)


def load_pubmed(node_path, cites_path, name: str = "pubmed") -> Dataset:
    """Parse the Pubmed-Diabetes ``NODE.paper.tab`` / ``DIRECTED.cites.tab`` pair."""
    lines = _read_lines(node_path)
    try:
        next(lines)
        _, header = next(lines)
    except StopIteration:
        raise DatasetError(f"{node_path}: missing header lines") from None
    columns = {}
    for column in header.split("\t"):
        kind, _, rest = column.partition(":")
        if kind == "numeric":
            columns[rest.split(":")[0]] = len(columns)
    d = len(columns)
    ids, feats, labels = [], [], []
    for lineno, line in lines:
        parts = line.split("\t")
        row = np.zeros(d)
        label = None
        for item in parts[1:]:
            key, _, val = item.partition("=")
            if key == "label":
                label = val
            elif key in columns:
                try:
                    row[columns[key]] = float(val)
                except ValueError:
                    raise DatasetError(f"{node_path}:{lineno}: bad value {item!r}") from None
            elif key != "summary":
                raise DatasetError(f"{node_path}:{lineno}: unknown attribute {key!r}")
        if label is None:
            raise DatasetError(f"{node_path}:{lineno}: no label")
        ids.append(parts[0])
        feats.append(row)
        labels.append(label)
    index = {s: i for i, s in enumerate(ids)}
    edges, skipped = [], 0
    for lineno, line in _read_lines(cites_path):
        parts = line.split("\t")
        if len(parts) < 4 or not parts[1].startswith("paper:"):
            if lineno <= 2:
                continue
            raise DatasetError(f"{cites_path}:{lineno}: malformed citation line")
        a = index.get(parts[1].split(":", 1)[1])
        b = index.get(parts[3].split(":", 1)[1])
        if a is None or b is None:
            skipped += 1
            continue
        edges.append((a, b))
    return _assemble(name, ids, feats, labels, edges, skipped)


def is_pubmed_format(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith("NODE")


def load_raw(features_path, cites_path, name: str | None = None) -> Dataset:
    if is_pubmed_format(features_path):
        return load_pubmed(features_path, cites_path, name or "pubmed")
    return load_content_cites(features_path, cites_path, name)


def save_canonical(ds: Dataset, path) -> None:
    meta = {"name": ds.name, "n": ds.n, "d": ds.num_features, "num_classes": ds.num_classes,
            "node_ids": ds.node_ids, "class_names": ds.class_names,
            "skipped_edges": ds.skipped_edges}
    write_container(path, DATASET_MAGIC, DATASET_VERSION, meta, {
        "labels": ds.labels.astype(np.int64),
        "row_offsets": ds.graph.row_offsets,
        "col_indices": ds.graph.col_indices,
        "features": ds.features.astype(np.float64),
    })


def load_canonical(path) -> Dataset:
    meta, arr = read_container(path, DATASET_MAGIC, DATASET_VERSION)
    g = SparseGraph(meta["n"], arr["row_offsets"], arr["col_indices"])
    return Dataset(g, arr["features"].reshape(meta["n"], meta["d"]), arr["labels"],
                   meta["num_classes"], meta["node_ids"], meta["name"], meta["class_names"],
                   meta["skipped_edges"])


def data_dir() -> Path | None:
    root = os.environ.get(DATA_DIR_ENV)
    return Path(root) if root else None


def find_dataset(name_or_path: str) -> Path | tuple[Path, Path]:
    """Locate a dataset by path or by name under ``$BGCN_DATA_DIR``.

    Returns a canonical file path, or a ``(features, cites)`` pair of raw
    files. Raises ``FileNotFoundError`` when nothing matches.
    """
    p = Path(name_or_path)
    if p.is_file():
        return p
    root = data_dir()
    if root is not None:
        name = name_or_path.lower()
        for cand in (root / f"{name}.bgcn", root / name / f"{name}.bgcn"):
            if cand.is_file():
                return cand
        raw = [(root / name / f"{name}.content", root / name / f"{name}.cites"),
               (root / f"{name}.content", root / f"{name}.cites")]
        if name == "pubmed":
            for base in (root / "pubmed", root / "Pubmed-Diabetes" / "data", root):
                raw.append((base / "Pubmed-Diabetes.NODE.paper.tab",
                            base / "Pubmed-Diabetes.DIRECTED.cites.tab"))
        for feats, cites in raw:
            if feats.is_file() and cites.is_file():
                return feats, cites
    where = f"under {root}" if root else f"(set {DATA_DIR_ENV})"
    raise FileNotFoundError(f"dataset {name_or_path!r} not found {where}")


def load_dataset(name_or_path: str) -> Dataset:
    loc = find_dataset(name_or_path)
    if isinstance(loc, tuple):
        return load_raw(*loc, name=Path(name_or_path).stem.lower())
    return load_canonical(loc)


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Scale rows to sum 1; all-zero rows stay zero."""
    features = np.asarray(features, dtype=np.float64)
    s = features.sum(axis=1, keepdims=True)
    return np.divide(features, s, out=np.zeros_like(features), where=s > 0)


def make_random_split(ds: Dataset, labels_per_class: int, seed: int,
                      val_size: int = DEFAULT_VAL_SIZE,
                      test_size: int = DEFAULT_TEST_SIZE) -> Split:
    """``labels_per_class`` training nodes per class, then val/test from the rest."""
    if labels_per_class < 1:
        raise ValueError("labels_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    train = []
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size < labels_per_class:
            cname = ds.class_names[c] if c < len(ds.class_names) else str(c)
            raise DatasetError(f"class {c} ({cname}) has {members.size} nodes, "
                               f"fewer than {labels_per_class}")
        train.append(rng.choice(members, labels_per_class, replace=False))
    train_idx = np.sort(np.concatenate(train))
    rest = np.setdiff1d(np.arange(ds.n), train_idx)
    if rest.size < val_size + test_size:
        raise DatasetError(f"only {rest.size} unlabelled nodes for {val_size} validation "
                           f"and {test_size} test nodes")
    perm = rng.permutation(rest)
    return Split(train_idx, np.sort(perm[:val_size]),
                 np.sort(perm[val_size:val_size + test_size]), labels_per_class, seed)


def synthetic_citation(num_classes: int = 3, nodes_per_class: int = 60, d: int = 40,
                       p_in: float = 0.08, p_out: float = 0.01, word_signal: float = 0.25,
                       word_noise: float = 0.08, seed: int = 0, name: str = "synthetic") -> Dataset:
    """Planted-partition graph with binary bag-of-words features.

    Each class owns ``d // num_classes`` topic words that its nodes use with
    probability ``word_signal``; every word also appears with probability
    ``word_noise``. Used for tests and demos without the real corpora.
    """
    rng = np.random.default_rng(seed)
    n = num_classes * nodes_per_class
    labels = np.repeat(np.arange(num_classes), nodes_per_class)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    edges = np.argwhere(upper)
    topic = np.arange(d) % num_classes
    p_word = np.where(topic[None, :] == labels[:, None], word_signal, 0.0) + word_noise
    feats = (rng.random((n, d)) < p_word).astype(np.float64)
    perm = rng.permutation(n)  # shuffle node order so classes are not contiguous
    inv = np.argsort(perm)
    edges = inv[edges]
    g = build_graph(edges, n)
    return Dataset(g, feats[perm], labels[perm], num_classes,
                   [f"n{i}" for i in range(n)], name, [f"c{c}" for c in range(num_classes)])
