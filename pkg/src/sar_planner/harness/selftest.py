"""Built-in invariant checks run by ``sar-planner selftest``."""

from __future__ import annotations

import time

import numpy as np

from ..ahp import DEFAULT_TABLE, calibrate_matrices, consistency_ratio, derive_weights
from ..approximator import Mlp
from ..enums import Label
from ..replay import LabeledBuffer


def _fd_max_rel_error(net: Mlp, x: np.ndarray, g: np.ndarray, h: float = 1e-5) -> float:
    grads = net.backward(x, g)
    worst = 0.0

    def f():
        return float(np.sum(g * net.forward(x)))

    for p, gp in zip(net.parameters(), grads.arrays()):
        flat, gflat = p.reshape(-1), gp.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = f()
            flat[i] = old - h
            down = f()
            flat[i] = old
            worst = max(worst, _rel((up - down) / (2 * h), gflat[i]))
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        worst = max(worst, _rel((up - down) / (2 * h), grads.inputs[i]))
    return worst


def _rel(numeric: float, analytic: float) -> float:
    # absolute floor keeps near-zero gradients from inflating the ratio
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)


def check_gradients(trials: int = 10, seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        sizes = [int(rng.integers(2, 8)), int(rng.integers(2, 10)), int(rng.integers(2, 10)), int(rng.integers(1, 4))]
        net = Mlp(sizes, str(rng.choice(["identity", "tanh"])), rng)
        x = rng.normal(size=sizes[0])
        g = rng.normal(size=sizes[-1])
        worst = max(worst, _fd_max_rel_error(net, x, g))
    return worst < 1e-4, f"max relative error {worst:.2e} over {trials} nets"


def check_ahp() -> tuple[bool, str]:
    worst, worst_cr = 0.0, 0.0
    for label, mat in calibrate_matrices(DEFAULT_TABLE).items():
        w, lam = derive_weights(mat)
        worst = max(worst, float(np.max(np.abs(w.as_array() - DEFAULT_TABLE[label].as_array()))))
        worst_cr = max(worst_cr, abs(consistency_ratio(mat, lam)))
    return worst < 1e-6 and worst_cr < 1e-9, f"round-trip error {worst:.1e}, max |CR| {worst_cr:.1e}"


def check_replay(ops: int = 20_000, seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    buf = LabeledBuffer(97, 3, 2)
    shadow = [None] * buf.capacity
    violations = 0
    for i in range(ops):
        lab = Label(int(rng.integers(4)))
        shadow[buf.cursor] = lab
        buf.push(np.zeros(3), np.zeros(2), 0.0, np.zeros(3), False, lab)
        if i % 97 == 0:
            violations += len(buf.check_consistency())
            expect = {label: sum(s is label for s in shadow) for label in Label}
            violations += sum(buf.count(label) != n for label, n in expect.items())
    violations += len(buf.check_consistency())
    return violations == 0, f"{violations} violations over {ops} pushes"


def run_selftest(quick: bool = False, out=print) -> bool:
    suites = [
        ("gradient check", lambda: check_gradients(3 if quick else 10)),
        ("AHP recovery", check_ahp),
        ("replay partition", lambda: check_replay(2_000 if quick else 20_000)),
    ]
    ok_all = True
    for name, fn in suites:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"raised {exc!r}"
        ok_all &= ok
        out(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({time.perf_counter() - t0:.2f}s)")
    return ok_all
