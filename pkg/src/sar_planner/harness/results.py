"""Metrics and result files (episodes.csv, summary.txt, reward_ma.csv, traces)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from ..enums import Terminal

if TYPE_CHECKING:
    from .config import RunConfig
    from .training import EpisodeRecord

EPISODE_COLUMNS = ["episode", "seed", "outcome", "steps", "reward", "path_len", "min_clearance", "max_drift"]
COLLISION_OUTCOMES = (Terminal.COLLISION, Terminal.OUT_OF_BOUNDS)


def _num(x) -> str:
    return repr(float(x))


def episode_row(rec: "EpisodeRecord") -> list[str]:
    return [str(rec.episode), str(rec.seed), rec.outcome.value, str(rec.steps),
            _num(rec.reward), _num(rec.path_len), _num(rec.min_clearance), _num(rec.max_drift)]


class EpisodeWriter:
    """Appends one CSV row per episode and flushes, so the file is valid at any line boundary."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="", encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot open {self.path} for writing: {exc}") from exc
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(EPISODE_COLUMNS)
        self._fh.flush()

    def write(self, rec: "EpisodeRecord") -> None:
        self._csv.writerow(episode_row(rec))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def episodes_csv(records: Iterable["EpisodeRecord"]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_COLUMNS)
    for rec in records:
        w.writerow(episode_row(rec))
    return buf.getvalue()


def read_episodes_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("episode", "seed", "steps"):
            row[key] = int(row[key])
        for key in ("reward", "path_len", "min_clearance", "max_drift"):
            row[key] = float(row[key])
    return rows


@dataclass
class SeedSummary:
    seed: int
    episodes: int
    sr: float
    cr: float
    ar: float
    mean_path_len: float
    moving_average: list[float] = field(default_factory=list)


@dataclass
class Summary:
    episodes: int
    sr: float
    cr: float
    ar: float
    mean_path_len: float
    outcome_counts: dict[str, int]
    per_seed: list[SeedSummary]


def success_rate(outcomes) -> float:
    outcomes = list(outcomes)
    return 100.0 * sum(o is Terminal.SUCCESS or o == Terminal.SUCCESS.value for o in outcomes) / len(outcomes)


def collision_rate(outcomes) -> float:
    outcomes = list(outcomes)
    bad = {t.value for t in COLLISION_OUTCOMES}
    return 100.0 * sum(getattr(o, "value", o) in bad for o in outcomes) / len(outcomes)


def moving_average(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if len(values) < window:
        return np.zeros(0)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    return (csum[window:] - csum[:-window]) / window


def min_max_normalize(series) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if not len(series):
        return series
    lo, hi = series.min(), series.max()
    return np.zeros_like(series) if hi == lo else (series - lo) / (hi - lo)


def _stats(records) -> tuple[float, float, float, float]:
    if not records:
        return 0.0, 0.0, 0.0, 0.0
    outcomes = [r.outcome for r in records]
    return (success_rate(outcomes), collision_rate(outcomes),
            float(np.mean([r.reward for r in records])), float(np.mean([r.path_len for r in records])))


def summarize(records: list["EpisodeRecord"], window: int = 50) -> Summary:
    sr, cr, ar, pl = _stats(records)
    counts = {t.value: 0 for t in Terminal if t is not Terminal.NONE}
    for r in records:
        counts[r.outcome.value] += 1
    per_seed = []
    for seed in dict.fromkeys(r.seed for r in records):
        recs = [r for r in records if r.seed == seed]
        s_sr, s_cr, s_ar, s_pl = _stats(recs)
        ma = moving_average([r.reward for r in recs], window)
        per_seed.append(SeedSummary(seed, len(recs), s_sr, s_cr, s_ar, s_pl, ma.tolist()))
    return Summary(len(records), sr, cr, ar, pl, counts, per_seed)


def format_summary(summary: Summary, cfg: "RunConfig | None" = None) -> str:
    lines = []
    if cfg is not None:
        lines += [f"algo = {cfg.algo.value}", f"scenario = {cfg.scenario.value}"]
    lines += [
        f"episodes = {summary.episodes}",
        f"sr = {_num(summary.sr)}",
        f"cr = {_num(summary.cr)}",
        f"ar = {_num(summary.ar)}",
        f"mean_path_len = {_num(summary.mean_path_len)}",
    ]
    lines += [f"count.{k} = {v}" for k, v in summary.outcome_counts.items()]
    for s in summary.per_seed:
        p = f"seed.{s.seed}"
        lines += [f"{p}.episodes = {s.episodes}", f"{p}.sr = {_num(s.sr)}", f"{p}.cr = {_num(s.cr)}",
                  f"{p}.ar = {_num(s.ar)}", f"{p}.mean_path_len = {_num(s.mean_path_len)}"]
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def moving_average_csv(summary: Summary, window: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "episode", "reward_ma", "reward_ma_normalized"])
    for s in summary.per_seed:
        norm = min_max_normalize(s.moving_average)
        for i, (v, n) in enumerate(zip(s.moving_average, norm)):
            w.writerow([s.seed, i + window, _num(v), _num(n)])
    return buf.getvalue()


def write_summary(path, summary: Summary, cfg: "RunConfig | None" = None) -> None:
    path = Path(path)
    write_text(path, format_summary(summary, cfg))
    window = cfg.ma_window if cfg is not None else 50
    write_text(path.with_name("reward_ma.csv"), moving_average_csv(summary, window))


def emit_results(records: list["EpisodeRecord"], summary: Summary, out_dir, traces: dict[int, list[str]] | None = None,
                 cfg: "RunConfig | None" = None) -> None:
    """Write a complete result set for already-collected records."""
    from ..world import TRACE_HEADER

    out_dir = Path(out_dir)
    write_text(out_dir / "episodes.csv", episodes_csv(records))
    write_summary(out_dir / "summary.txt", summary, cfg)
    for seed, lines in (traces or {}).items():
        write_text(out_dir / f"trace_{seed}.csv", TRACE_HEADER + "\n" + "".join(line + "\n" for line in lines))
