#!/usr/bin/env python3
"""Convert the raw Planetoid files (ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index})
into a calgnn dataset bundle.

    python3 scripts/planetoid_to_bundle.py RAW_DIR NAME OUT_DIR

Uses the standard public split: 20 labelled nodes per class for training,
the next 500 nodes for validation and the 1000 listed test nodes.
Citeseer's isolated test ids get zero features and are labelled class 0,
but never appear in any split.
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw, name, part):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    raw, name, out = Path(sys.argv[1]), sys.argv[2], Path(sys.argv[3])
    x, y, tx, ty, allx, ally, graph = (load(raw, name, p) for p in ["x", "y", "tx", "ty", "allx", "ally", "graph"])
    test_idx = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_idx)

    if name == "citeseer":
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_idx, :] = labels[test_sorted, :]
    labels = labels.argmax(axis=1)
    n = features.shape[0]

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    dense = features.toarray()
    with open(out / "features.csv", "w") as f:
        for row in dense:
            f.write(",".join(f"{v:g}" for v in row) + "\n")
    with open(out / "labels.csv", "w") as f:
        f.writelines(f"{int(c)}\n" for c in labels)
    splits = {
        "train": list(range(len(y))),
        "val": list(range(len(y), len(y) + 500)),
        "test": [int(i) for i in test_sorted],
    }
    (out / "splits.json").write_text(json.dumps(splits))
    meta = {"num_nodes": n, "num_classes": int(labels.max()) + 1, "num_features": dense.shape[1]}
    (out / "meta.json").write_text(json.dumps(meta))
    print(f"{name}: {n} nodes, {len(edges)} edges, {meta['num_features']} features, {meta['num_classes']} classes")


if __name__ == "__main__":
    main()
