"""Per-position LSTM state traces for heatmap-style inspection.

Matrices are ``hidden_size x length``: one row per hidden unit, one column
per position. The structure trace puts the 5' branch's columns first and the
flipped branch's columns reversed after them, so column ``j`` always
describes position ``j`` of the original sequence.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import network


@dataclass
class ForwardTrace:
    sample_id: str
    sequence: str
    structure: str
    cells: dict = field(default_factory=dict)  # branch -> (H x T) cell states
    hidden: dict = field(default_factory=dict)  # branch -> (H x T) hidden states
    outputs: dict = field(default_factory=dict)  # y_seq / y_str / y_hat

    def aligned(self, which="cells"):
        """``{"sequence": H x L, "structure": H x L}`` aligned to sequence positions."""
        states = getattr(self, which)
        out = {}
        if "seq" in states:
            out["sequence"] = states["seq"]
        if "fwd" in states:
            out["structure"] = np.concatenate([states["fwd"], states["bwd"][:, ::-1]], axis=1)
        elif "str" in states:
            out["structure"] = states["str"]
        return out


def capture_trace(sample: network.PreparedSample, model: network.Model) -> ForwardTrace:
    """Run ``sample`` through ``model`` (inference mode) and keep every state."""
    hp = model.hp
    res = network.forward([sample], model.params, hp, keep_cache=True)
    tr = ForwardTrace(sample.id, sample.sequence, sample.structure)
    for br in hp.branches:
        cache = res.caches[br]
        n = len(sample.stream(br))
        tr.cells[br] = cache["Cs"][0, 1:n + 1].T.copy()
        tr.hidden[br] = cache["Hs"][0, 1:n + 1].T.copy()
    if "dense_seq" in res.caches:
        tr.outputs["y_seq"] = res.caches["dense_seq"][1][0].tolist()
    if "dense_str" in res.caches:
        tr.outputs["y_str"] = res.caches["dense_str"][1][0].tolist()
    tr.outputs["y_hat"] = res.y_hat[0].tolist()
    return tr


def _header(tr: ForwardTrace, name: str):
    return list(tr.sequence) if name == "sequence" else list(tr.structure)


def write_trace_csv(tr: ForwardTrace, out_dir, which="cells") -> list[Path]:
    """One CSV per branch group; header row holds the aligned characters."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, mat in tr.aligned(which).items():
        path = out_dir / f"{tr.sample_id}.{name}.{which}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["unit"] + _header(tr, name))
            for u, row in enumerate(mat):
                w.writerow([u] + [repr(float(v)) for v in row])
        paths.append(path)
    return paths


def trace_to_dict(tr: ForwardTrace) -> dict:
    doc = {
        "sample_id": tr.sample_id,
        "sequence": tr.sequence,
        "structure": tr.structure,
        "outputs": tr.outputs,
    }
    for which in ("cells", "hidden"):
        doc[which] = {
            name: {"columns": _header(tr, name), "rows": mat.tolist()}
            for name, mat in tr.aligned(which).items()
        }
    return doc


def write_trace_json(tr: ForwardTrace, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(trace_to_dict(tr), indent=1))
    return path
