"""Seeded augmentation policies that turn a dataset into contrastive views.

A policy draws ``n_ops`` operators uniformly (with replacement) from its pool
and applies them in draw order at one shared magnitude.  Randomness is fully
deterministic and order-independent: each (sample, view) pair gets its own
64-bit seed derived by hashing, so regenerating a dataset, or generating it
in a different order, produces byte-identical images.

Seed derivation is FNV-1a over ``master_seed`` (8 bytes little-endian), the
sample id (UTF-8), and the view index (8 bytes little-endian).  Draws come
from a splitmix64 stream seeded with that value; both primitives are fixed
here, independent of platform or library versions.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, InvalidMagnitude
from .image_ops import MAX_MAGNITUDE, OP_NAMES, OP_TABLE, apply_op
from .png_io import decode_png, encode_png

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xcbf29ce484222325
_FNV_PRIME = 0x100000001b3


def _fnv1a(data: bytes, state: int = _FNV_OFFSET) -> int:
    for byte in data:
        state = ((state ^ byte) * _FNV_PRIME) & _MASK64
    return state


def derive_seed(master_seed: int, sample_id: str, view_index: int) -> int:
    """64-bit per-view seed: FNV-1a over master seed, sample id, view index."""
    state = _fnv1a((master_seed & _MASK64).to_bytes(8, "little"))
    state = _fnv1a(sample_id.encode("utf-8"), state)
    return _fnv1a((view_index & _MASK64).to_bytes(8, "little"), state)


class _SplitMix64:
    """Deterministic 64-bit stream (splitmix64) for operator and sign draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)

    def sign(self) -> int:
        return 1 if self.uniform() < 0.5 else -1


@dataclass(frozen=True)
class AugmentPolicy:
    """How contrastive views are drawn.

    ``sequence`` pins the exact operators (in order) instead of drawing them
    from the pool; signs are still drawn per view.  Used by the per-operator
    and operator-pair sweeps.
    """

    n_ops: int = 2
    magnitude: float = 20.0
    op_pool: tuple[str, ...] = OP_NAMES
    master_seed: int = 0
    sequence: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_ops < 1:
            raise ConfigError(f"n_ops must be >= 1, got {self.n_ops}")
        if not (0.0 <= self.magnitude <= MAX_MAGNITUDE):
            raise InvalidMagnitude(
                f"magnitude must lie in [0, {MAX_MAGNITUDE:g}], "
                f"got {self.magnitude!r}")
        if not self.op_pool:
            raise ConfigError("op_pool must not be empty")
        if len(set(self.op_pool)) != len(self.op_pool):
            raise ConfigError("op_pool contains duplicate names")
        for name in self.op_pool:
            if name not in OP_TABLE:
                raise ConfigError(f"op_pool references unknown operator "
                                  f"{name!r}")
        if self.sequence is not None:
            if len(self.sequence) != self.n_ops:
                raise ConfigError(
                    f"sequence length {len(self.sequence)} != n_ops "
                    f"{self.n_ops}")
            for name in self.sequence:
                if name not in OP_TABLE:
                    raise ConfigError(f"sequence references unknown operator "
                                      f"{name!r}")


@dataclass(frozen=True)
class ViewDescriptor:
    """A fully determined view: which ops (with signs) hit which sample."""

    sample_id: str
    view_index: int
    chosen_ops: tuple[tuple[str, int], ...]
    derived_seed: int


def sample_view(policy: AugmentPolicy, sample_id: str,
                view_index: int) -> ViewDescriptor:
    """Draw the operator chain for one (sample, view) pair.

    Draw order per operator slot: the operator index (skipped when the policy
    pins a sequence), then the sign for signed operators.
    """
    if view_index < 1:
        raise ConfigError(f"view_index must be >= 1 for contrastive views, "
                          f"got {view_index}")
    seed = derive_seed(policy.master_seed, sample_id, view_index)
    rng = _SplitMix64(seed)
    chosen = []
    for slot in range(policy.n_ops):
        if policy.sequence is not None:
            name = policy.sequence[slot]
        else:
            name = policy.op_pool[rng.randint(len(policy.op_pool))]
        sign = rng.sign() if OP_TABLE[name].signed else 1
        chosen.append((name, sign))
    return ViewDescriptor(sample_id=sample_id, view_index=view_index,
                          chosen_ops=tuple(chosen), derived_seed=seed)


def render_view(descriptor: ViewDescriptor, magnitude: float,
                image: np.ndarray) -> np.ndarray:
    """Apply a descriptor's operator chain to an image at one magnitude."""
    out = image
    for name, sign in descriptor.chosen_ops:
        out = apply_op(name, magnitude, sign, out)
    return out if out is not image else image.copy()


def format_ops(chosen_ops: Iterable[tuple[str, int]]) -> str:
    """Serialize an op chain as 'Rotate:-1;Color:+1' for manifest rows."""
    return ";".join(f"{name}:{sign:+d}" for name, sign in chosen_ops)


def parse_ops(text: str) -> tuple[tuple[str, int], ...]:
    """Inverse of format_ops."""
    if not text:
        return ()
    chain = []
    for part in text.split(";"):
        name, _, sign = part.partition(":")
        if name not in OP_TABLE or sign not in ("+1", "-1"):
            raise DataError(f"bad op chain entry {part!r}")
        chain.append((name, int(sign)))
    return tuple(chain)


@dataclass(frozen=True)
class GeneratedView:
    """One output row of a generation run (path relative to the output dir)."""

    sample_id: str
    view_index: int
    path: str
    label: int
    chosen_ops: tuple[tuple[str, int], ...]
    derived_seed: int


@dataclass(frozen=True)
class GenerationResult:
    out_dir: str
    manifest_path: str
    views: tuple[GeneratedView, ...] = field(repr=False)


def generate_contrastive_set(policy: AugmentPolicy,
                             rows: Sequence,
                             out_dir: str | os.PathLike,
                             views_per_sample: int = 1) -> GenerationResult:
    """Render contrastive views for every manifest row.

    ``rows`` are (sample_id, path, label) manifest rows (see
    data_io.read_manifest).  Images land in ``out_dir/images/`` named
    ``{sample_id}_v{view_index}.png`` and an output manifest with columns
    sample_id, view_index, path, label, ops, seed is written to
    ``out_dir/manifest.csv``.  Output is sorted by (sample_id, view_index)
    and is byte-identical regardless of input row order.
    """
    if views_per_sample < 1:
        raise ConfigError(f"views_per_sample must be >= 1, "
                          f"got {views_per_sample}")
    if not rows:
        raise DataError("input manifest has no rows")
    ids = [row.sample_id for row in rows]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"duplicate sample ids in manifest: {dupes[:5]}")

    out_path = Path(out_dir)
    (out_path / "images").mkdir(parents=True, exist_ok=True)
    views = []
    for row in sorted(rows, key=lambda r: r.sample_id):
        image = decode_png(row.path)
        for k in range(1, views_per_sample + 1):
            desc = sample_view(policy, row.sample_id, k)
            rendered = render_view(desc, policy.magnitude, image)
            rel = f"images/{row.sample_id}_v{k}.png"
            encode_png(rendered, out_path / rel)
            views.append(GeneratedView(
                sample_id=row.sample_id, view_index=k, path=rel,
                label=row.label, chosen_ops=desc.chosen_ops,
                derived_seed=desc.derived_seed))

    manifest_path = out_path / "manifest.csv"
    lines = ["sample_id,view_index,path,label,ops,seed"]
    for v in views:
        lines.append(f"{v.sample_id},{v.view_index},{v.path},{v.label},"
                     f"{format_ops(v.chosen_ops)},{v.derived_seed}")
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return GenerationResult(out_dir=str(out_path),
                            manifest_path=str(manifest_path),
                            views=tuple(views))


def read_view_manifest(path: str | os.PathLike) -> tuple[GeneratedView, ...]:
    """Read back a generation manifest; paths stay relative to its directory."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != "sample_id,view_index,path,label,ops,seed":
        raise DataError(f"{os.fspath(path)}: not a view manifest")
    views = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise DataError(f"{os.fspath(path)}:{i}: expected 6 columns, "
                            f"got {len(parts)}")
        sid, vidx, rel, label, ops, seed = parts
        views.append(GeneratedView(
            sample_id=sid, view_index=int(vidx), path=rel, label=int(label),
            chosen_ops=parse_ops(ops), derived_seed=int(seed)))
    return tuple(views)
