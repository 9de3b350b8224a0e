"""Dense tensors at a point with explicit up/down slot bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

UP, DOWN = "u", "d"
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class TensorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TensorValue:
    """Row-major dense tensor; ``valence[i]`` is ``"u"`` or ``"d"`` for slot i."""

    dims: int
    valence: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.shape != (self.dims,) * len(self.valence):
            raise TensorError(
                f"entries shape {arr.shape} does not match dims={self.dims}, rank={len(self.valence)}"
            )
        if any(v not in (UP, DOWN) for v in self.valence):
            raise TensorError(f"bad valence {self.valence!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "valence", tuple(self.valence))
        object.__setattr__(self, "entries", arr)

    @property
    def rank(self) -> int:
        return len(self.valence)

    @classmethod
    def down(cls, entries) -> "TensorValue":
        arr = np.asarray(entries, dtype=float)
        return cls(arr.shape[0] if arr.ndim else 1, (DOWN,) * arr.ndim, arr)

    @classmethod
    def up(cls, entries) -> "TensorValue":
        arr = np.asarray(entries, dtype=float)
        return cls(arr.shape[0] if arr.ndim else 1, (UP,) * arr.ndim, arr)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def __repr__(self) -> str:
        v = "".join(self.valence)
        return f"TensorValue(d={self.dims}, valence={v!r}, entries={self.entries.tolist()!r})"


def identity(d: int) -> TensorValue:
    return TensorValue(d, (UP, DOWN), np.eye(d))


def _check_dims(*ts: TensorValue):
    dims = {t.dims for t in ts}
    if len(dims) != 1:
        raise TensorError(f"dimension mismatch: {sorted(dims)}")


def symmetrize(t: TensorValue) -> TensorValue:
    if t.rank != 2 or t.valence[0] != t.valence[1]:
        raise TensorError("symmetrize needs a rank-2 tensor with like slots")
    return TensorValue(t.dims, t.valence, 0.5 * (t.entries + t.entries.T))


def antisymmetrize(t: TensorValue) -> TensorValue:
    if t.rank != 2 or t.valence[0] != t.valence[1]:
        raise TensorError("antisymmetrize needs a rank-2 tensor with like slots")
    return TensorValue(t.dims, t.valence, 0.5 * (t.entries - t.entries.T))


def symmetrize_tf(t: TensorValue, g_inv: TensorValue, g: TensorValue | None = None) -> TensorValue:
    """Trace-free symmetric part ``t_((ab))o`` of a covariant 2-tensor."""
    _check_dims(t, g_inv)
    if t.valence != (DOWN, DOWN) or g_inv.valence != (UP, UP):
        raise TensorError("symmetrize_tf expects t down-down and g_inv up-up")
    gi = g_inv.entries
    gl = np.linalg.inv(gi) if g is None else g.entries
    s = 0.5 * (t.entries + t.entries.T)
    tr = float(np.einsum("ab,ab->", gi, s))
    return TensorValue(t.dims, (DOWN, DOWN), s - tr / t.dims * gl)


def contract(a: TensorValue, b: TensorValue, pairs: Sequence[tuple[int, int]]) -> TensorValue:
    """Contract slot ``i`` of `a` with slot ``j`` of `b` for each ``(i, j)``.

    The result carries a's free slots followed by b's free slots.
    """
    _check_dims(a, b)
    if a.rank + b.rank > len(_LETTERS):
        raise TensorError("rank too large")
    la = list(_LETTERS[: a.rank])
    lb = list(_LETTERS[a.rank : a.rank + b.rank])
    used_a, used_b = set(), set()
    for i, j in pairs:
        if i in used_a or j in used_b:
            raise TensorError("a slot appears in two contraction pairs")
        if a.valence[i] == b.valence[j]:
            raise TensorError(
                f"cannot contract two {'upper' if a.valence[i] == UP else 'lower'} slots; "
                "raise or lower explicitly with the metric"
            )
        used_a.add(i)
        used_b.add(j)
        lb[j] = la[i]
    out_a = [k for k in range(a.rank) if k not in used_a]
    out_b = [k for k in range(b.rank) if k not in used_b]
    spec = "".join(la) + "," + "".join(lb) + "->" + "".join(la[k] for k in out_a) + "".join(lb[k] for k in out_b)
    val = tuple(a.valence[k] for k in out_a) + tuple(b.valence[k] for k in out_b)
    return TensorValue(a.dims, val, np.einsum(spec, a.entries, b.entries))


def self_trace(t: TensorValue, i: int, j: int) -> TensorValue:
    if t.valence[i] == t.valence[j]:
        raise TensorError("trace needs one upper and one lower slot")
    letters = list(_LETTERS[: t.rank])
    letters[j] = letters[i]
    out = [letters[k] for k in range(t.rank) if k not in (i, j)]
    spec = "".join(letters) + "->" + "".join(out)
    val = tuple(t.valence[k] for k in range(t.rank) if k not in (i, j))
    return TensorValue(t.dims, val, np.einsum(spec, t.entries))


def metric_trace(t: TensorValue, i: int, j: int, g_inv: TensorValue) -> TensorValue:
    """Trace over two lower slots using the inverse metric."""
    if t.valence[i] != DOWN or t.valence[j] != DOWN:
        raise TensorError("metric_trace expects two lower slots")
    raised = raise_index(t, i, g_inv)
    return self_trace(raised, i, j)


def _move_slot(arr: np.ndarray, mat: np.ndarray, slot: int) -> np.ndarray:
    moved = np.tensordot(mat, arr, axes=([1], [slot]))
    return np.moveaxis(moved, 0, slot)


def raise_index(t: TensorValue, slot: int, g_inv: TensorValue) -> TensorValue:
    _check_dims(t, g_inv)
    if t.valence[slot] != DOWN:
        raise TensorError(f"slot {slot} is already upper")
    val = list(t.valence)
    val[slot] = UP
    return TensorValue(t.dims, tuple(val), _move_slot(t.entries, g_inv.entries, slot))


def lower_index(t: TensorValue, slot: int, g: TensorValue) -> TensorValue:
    _check_dims(t, g)
    if t.valence[slot] != UP:
        raise TensorError(f"slot {slot} is already lower")
    val = list(t.valence)
    val[slot] = DOWN
    return TensorValue(t.dims, tuple(val), _move_slot(t.entries, g.entries, slot))


def restrict(t: TensorValue, indices: Sequence[int]) -> TensorValue:
    """Sub-block on the given coordinate indices in every slot (tangential part)."""
    idx = np.ix_(*([list(indices)] * t.rank)) if t.rank else ()
    return TensorValue(len(indices), t.valence, t.entries[idx])


def close(a: TensorValue, b: TensorValue, tol: float = 1e-12) -> bool:
    """Entrywise agreement at `tol`, scaled by magnitude beyond unit scale."""
    scale = max(1.0, a.max_abs(), b.max_abs())
    return float(np.max(np.abs(a.entries - b.entries), initial=0.0)) <= tol * scale
