"""Acceptance gate for the exporter: the round trip into the pipeline.

A 10-image fixture flows through both producers: this adapter running a
PyTorch checkpoint, and the pipeline's built-in reference model writing the
same record format.  Both outputs must pass the pipeline's own validation
with zero errors and come out of ``contre score`` as interchangeable inputs.
The pipeline side is driven through its installed command, not its library,
except for ``read_predictions``, which is the validation the criterion names.
"""

from __future__ import annotations

import re
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn as nn
from PIL import Image

from contre_torch.cli import main as adapter_main

N_FIXTURE = 10
SCORE_LINE = re.compile(r"^(\S+) (\S+): (\d\.\d{4}) \((\d+) records\)$")


def announce(criterion: str, passed: bool, detail: str) -> None:
    # the root conftest re-emits these lines past pytest's capture
    print(f"[ACCEPTANCE] {criterion}: "
          f"{'PASS' if passed else 'FAIL'} ({detail})")


class ShapesNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.body = nn.Sequential(
            nn.Flatten(), nn.Linear(32 * 32 * 3, 24), nn.ReLU())
        self.head = nn.Linear(24, 3)

    def forward(self, x):
        return self.head(self.body(x))


def contre_cli(*args: str) -> subprocess.CompletedProcess:
    exe = shutil.which("contre")
    assert exe is not None, "the pipeline CLI must be installed"
    return subprocess.run([exe, *args], capture_output=True, text=True)


def load_batch(paths: list[Path]) -> torch.Tensor:
    images = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8)
              for p in paths]
    batch = torch.from_numpy(np.stack(images))
    return batch.permute(0, 3, 1, 2).float() / 255.0


def train_checkpoint(image_paths: list[Path], labels: list[int],
                     out: Path) -> None:
    torch.manual_seed(20260816)
    net = ShapesNet()
    x = load_batch(image_paths)
    y = torch.tensor(labels)
    optimizer = torch.optim.Adam(net.parameters(), lr=1e-2)
    for _ in range(150):
        optimizer.zero_grad()
        loss = nn.functional.cross_entropy(net(x), y)
        loss.backward()
        optimizer.step()
    torch.save(net.eval(), out)


def parse_score_stdout(text: str) -> dict[tuple[str, str], tuple[float, int]]:
    table = {}
    for line in text.splitlines():
        match = SCORE_LINE.match(line)
        assert match, f"unexpected score line: {line!r}"
        model_id, view, acc, count = match.groups()
        table[(model_id, view)] = (float(acc), int(count))
    return table


def test_adapter_round_trip(tmp_path):
    from contre.data_io import (PredictionRecord, read_manifest,
                                read_predictions, write_predictions)
    from contre.harness import write_shapes_data
    from contre.png_io import decode_png
    from contre.reference_model import (ModelConfig, extract_features_batch,
                                        logits_batch, predict_batch, train)

    manifest_path = write_shapes_data(tmp_path / "data", N_FIXTURE,
                                      seed=20260816, prefix="fx")
    gen = contre_cli("gen", "--data", manifest_path,
                     "--out", str(tmp_path / "views"), "--seed", "3")
    assert gen.returncode == 0, gen.stderr
    rows = read_manifest(manifest_path)
    view_manifest = tmp_path / "views" / "manifest.csv"

    ckpt = tmp_path / "shapes.pt"
    train_checkpoint([Path(r.path) for r in rows],
                     [r.label for r in rows], ckpt)

    adapter_files = []
    for view, manifest in (("test_orig", Path(manifest_path)),
                           ("test_contre", view_manifest)):
        out = tmp_path / f"adapter_{view}.jsonl"
        rc = adapter_main(["--model", str(ckpt), "--manifest", str(manifest),
                           "--view", view, "--out", str(out),
                           "--model-id", "torch-net"])
        assert rc == 0
        adapter_files.append(out)

    # the criterion's validation: every exported line must parse cleanly
    validated = 0
    for path in adapter_files:
        try:
            records = list(read_predictions(path))
        except Exception as exc:
            announce("adapter-round-trip", False, f"validation error: {exc}")
            raise
        assert len(records) == N_FIXTURE
        for rec in records:
            assert rec.model_id == "torch-net"
            assert rec.feature_dim == 24
            assert rec.logits is not None and len(rec.logits) == 3
        validated += len(records)

    # built-in-model output over the same samples and views
    images = np.stack([decode_png(r.path) for r in rows])
    labels = np.array([r.label for r in rows])
    ref = train(ModelConfig(model_id="ref-net", hidden_widths=(24,),
                            epochs=20, init_seed=5), images, labels)
    from contre.augment import read_view_manifest
    views = read_view_manifest(view_manifest)
    view_images = np.stack([decode_png(view_manifest.parent / v.path)
                            for v in views])
    builtin_files = []
    for view, batch, meta in (
            ("test_orig", images, [(r.sample_id, 0, r.label) for r in rows]),
            ("test_contre", view_images,
             [(v.sample_id, v.view_index, v.label) for v in views])):
        preds = predict_batch(ref, batch)
        logits = logits_batch(ref, batch)
        feats = extract_features_batch(ref, batch)
        records = [PredictionRecord(
            model_id="ref-net", view=view, sample_id=sid, view_index=vidx,
            label=label, pred=int(preds[i]),
            logits=tuple(float(v) for v in logits[i]),
            feature=feats[i].astype(np.float32),
            feature_dim=feats.shape[1]) for i, (sid, vidx, label)
            in enumerate(meta)]
        out = tmp_path / f"builtin_{view}.jsonl"
        write_predictions(records, out)
        builtin_files.append(out)

    # one consumer, both producers: a single score call must accept the mix
    mixed = contre_cli("score", "--pred",
                       *[str(p) for p in adapter_files + builtin_files],
                       "--out", str(tmp_path / "scores.json"))
    assert mixed.returncode == 0, mixed.stderr
    table = parse_score_stdout(mixed.stdout)

    # scored alone, the adapter's files produce the same rows as in the mix
    alone = contre_cli("score", "--pred", *[str(p) for p in adapter_files],
                       "--out", str(tmp_path / "scores_alone.json"))
    assert alone.returncode == 0, alone.stderr
    alone_table = parse_score_stdout(alone.stdout)

    all_cells = {(m, v) for m in ("torch-net", "ref-net")
                 for v in ("test_orig", "test_contre")}
    passed = (validated == N_FIXTURE * 2
              and set(table) == all_cells
              and all(count == N_FIXTURE for _, count in table.values())
              and all(0.0 <= acc <= 1.0 for acc, _ in table.values())
              and alone_table == {key: value for key, value in table.items()
                                  if key[0] == "torch-net"})
    orig_acc = table[("torch-net", "test_orig")][0]
    contre_acc = table[("torch-net", "test_contre")][0]
    announce("adapter-round-trip", passed,
             f"{validated}/{N_FIXTURE * 2} records valid; score accepted "
             f"both producers; adapter accuracy orig {orig_acc:.2f} / "
             f"contre {contre_acc:.2f}")
    assert passed
