"""Ring-buffer experience store partitioned by context label.

Each label keeps a dense array of the ring slots it owns plus a reverse map
slot -> position, so evictions are O(1) swap-removes and per-label uniform
sampling is a single integer draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .enums import Label

N_LABELS = len(Label)
_INITIAL_ALLOC = 4096


class BufferNotReady(LookupError):
    pass


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray
    label: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


class LabeledBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int = 2):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.size = 0
        self.cursor = 0  # next slot to write
        self.pushes = 0
        alloc = min(self.capacity, _INITIAL_ALLOC)
        self._s = np.zeros((alloc, state_dim))
        self._s2 = np.zeros((alloc, state_dim))
        self._a = np.zeros((alloc, action_dim))
        self._r = np.zeros(alloc)
        self._done = np.zeros(alloc)
        self._label = np.full(alloc, -1, dtype=np.int8)
        self._born = np.zeros(alloc, dtype=np.int64)
        self._slot_pos = np.full(alloc, -1, dtype=np.int64)
        self._members = [np.zeros(alloc, dtype=np.int64) for _ in range(N_LABELS)]
        self._counts = [0] * N_LABELS

    def __len__(self) -> int:
        return self.size

    def _grow(self, need: int) -> None:
        alloc = len(self._r)
        if need <= alloc:
            return
        new = min(self.capacity, max(need, 2 * alloc))

        def ext(arr, fill=0):
            out = np.full((new,) + arr.shape[1:], fill, dtype=arr.dtype)
            out[:alloc] = arr
            return out

        self._s, self._s2, self._a = ext(self._s), ext(self._s2), ext(self._a)
        self._r, self._done, self._born = ext(self._r), ext(self._done), ext(self._born)
        self._label, self._slot_pos = ext(self._label, -1), ext(self._slot_pos, -1)
        self._members = [ext(m) for m in self._members]

    def push(self, s, a, r: float, s_next, done: bool, label: Label) -> None:
        slot = self.cursor
        self._grow(slot + 1)
        old = int(self._label[slot])
        if old >= 0:
            self._remove_member(old, slot)
        else:
            self.size += 1
        lab = int(label)
        self._s[slot] = s
        self._a[slot] = a
        self._r[slot] = r
        self._s2[slot] = s_next
        self._done[slot] = float(done)
        self._label[slot] = lab
        self._born[slot] = self.pushes
        members = self._members[lab]
        members[self._counts[lab]] = slot
        self._slot_pos[slot] = self._counts[lab]
        self._counts[lab] += 1
        self.pushes += 1
        self.cursor = (slot + 1) % self.capacity

    def _remove_member(self, lab: int, slot: int) -> None:
        members = self._members[lab]
        pos = self._slot_pos[slot]
        last = self._counts[lab] - 1
        moved = members[last]
        members[pos] = moved
        self._slot_pos[moved] = pos
        self._counts[lab] = last
        self._slot_pos[slot] = -1

    def count(self, label: Label) -> int:
        return self._counts[int(label)]

    def label_slots(self, label: Label) -> np.ndarray:
        return self._members[int(label)][: self._counts[int(label)]].copy()

    def ready(self, batch: int) -> bool:
        return self.size >= batch

    def sample_uniform(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if not self.ready(batch):
            raise BufferNotReady(f"buffer holds {self.size} experiences, need {batch}")
        return rng.integers(self.size, size=batch)

    def sample_pair_batch(self, current_label: Label, batch: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Slot indices for a same-context batch and an unconditioned batch.

        An empty partition for ``current_label`` falls back to the whole buffer.
        """
        if not self.ready(batch):
            raise BufferNotReady(f"buffer holds {self.size} experiences, need {batch}")
        lab = int(current_label)
        n = self._counts[lab]
        if n:
            similar = self._members[lab][rng.integers(n, size=batch)]
        else:
            similar = rng.integers(self.size, size=batch)
        randoms = rng.integers(self.size, size=batch)
        return similar, randoms

    def gather(self, idx) -> Batch:
        idx = np.asarray(idx, dtype=np.int64)
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._done[idx], self._label[idx], idx)

    def age(self, idx) -> np.ndarray:
        """Pushes since each slot was written (0 = newest)."""
        return self.pushes - 1 - self._born[np.asarray(idx, dtype=np.int64)]

    def check_consistency(self) -> list[str]:
        """Return invariant violations (empty list when consistent)."""
        problems = []
        if sum(self._counts) != self.size:
            problems.append(f"partition sizes sum to {sum(self._counts)}, buffer holds {self.size}")
        seen = np.zeros(len(self._r), dtype=bool)
        for lab in range(N_LABELS):
            members = self._members[lab][: self._counts[lab]]
            if len(members) and (members.min() < 0 or members.max() >= self.size):
                problems.append(f"label {Label(lab).name} holds an out-of-range slot")
                continue
            if np.any(seen[members]):
                problems.append(f"label {Label(lab).name} shares slots with another label")
            seen[members] = True
            if np.any(self._label[members] != lab):
                problems.append(f"label {Label(lab).name} lists slots stored under another label")
            if np.any(self._slot_pos[members] != np.arange(len(members))):
                problems.append(f"label {Label(lab).name} reverse index out of sync")
        if not np.all(seen[: self.size]):
            problems.append("some stored slots belong to no label")
        return problems

    def stats(self, bins: int = 10) -> dict:
        counts = {label.name: self._counts[int(label)] for label in Label}
        if self.size:
            hist, edges = np.histogram(self.age(np.arange(self.size)), bins=bins)
        else:
            hist, edges = np.zeros(bins, dtype=int), np.zeros(bins + 1)
        return {"size": self.size, "capacity": self.capacity, "pushes": self.pushes,
                "label_counts": counts, "age_hist": hist.tolist(), "age_edges": edges.tolist()}

    def format_stats(self) -> str:
        st = self.stats()
        lines = [f"size = {st['size']}", f"capacity = {st['capacity']}", f"pushes = {st['pushes']}"]
        lines += [f"count.{k} = {v}" for k, v in st["label_counts"].items()]
        lines.append("age_hist = " + " ".join(str(h) for h in st["age_hist"]))
        return "\n".join(lines) + "\n"


def select_by_td(similar, randoms, td_similar, td_random) -> np.ndarray:
    """Per position, keep whichever candidate has the larger |TD error| (ties -> similar)."""
    similar, randoms = np.asarray(similar), np.asarray(randoms)
    td_similar, td_random = np.asarray(td_similar, dtype=float), np.asarray(td_random, dtype=float)
    if not (len(similar) == len(randoms) == len(td_similar) == len(td_random)):
        raise ValueError("select_by_td needs four equal-length sequences")
    return np.where(np.abs(td_similar) >= np.abs(td_random), similar, randoms)
