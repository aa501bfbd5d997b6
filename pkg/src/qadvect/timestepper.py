"""Postselected time marching: attempt a step, sample the ancilla, repeat.

Random numbers come from numpy's ``Generator`` with the PCG64 bit generator
seeded by :func:`make_rng`; a run records the seed it was started with.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .embedding import HermitianEmbedding, StepResult, apply_step


class Mode(enum.Enum):
    SAMPLED = "sampled"
    FORCED_SUCCESS = "forced-success"
    FORCED_FAILURE = "forced-failure"


class BranchVanishedError(RuntimeError):
    """A forced branch has (numerically) zero probability."""


class AttemptBudgetExceeded(RuntimeError):
    pass


VANISHING = 1e-15


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class StepOutcome:
    attempt: int
    success: bool
    p_success: float
    norm_error: float


@dataclass
class RunLog:
    seed: int | None
    outcomes: list[StepOutcome] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    final_state: np.ndarray | None = None

    @property
    def n_successes(self) -> int:
        return sum(o.success for o in self.outcomes)

    @property
    def n_failures(self) -> int:
        return sum(not o.success for o in self.outcomes)

    @property
    def attempts(self) -> int:
        return len(self.outcomes)

    def success_fraction(self) -> float:
        return self.n_successes / self.attempts if self.outcomes else float("nan")

    def mean_p_success(self) -> float:
        return float(np.mean([o.p_success for o in self.outcomes]))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["attempt", "success", "p_success"])
            for o in self.outcomes:
                writer.writerow([o.attempt, int(o.success), repr(o.p_success)])
        return path


def _normalize(x: np.ndarray, p: float) -> np.ndarray:
    return x / np.sqrt(p)


def step(
    state: np.ndarray,
    emb: HermitianEmbedding,
    rng: np.random.Generator | None,
    mode: Mode = Mode.SAMPLED,
    attempt: int = 0,
) -> tuple[np.ndarray, StepOutcome]:
    """One attempted time step followed by measurement of the ancilla."""
    result: StepResult = apply_step(emb, state)
    p = result.p_success
    mode = Mode(mode)
    if mode is Mode.SAMPLED:
        success = rng.random() < p
    else:
        success = mode is Mode.FORCED_SUCCESS
    branch, weight = (result.top, p) if success else (result.bottom, result.p_failure)
    if weight < VANISHING:
        raise BranchVanishedError(
            f"{'success' if success else 'failure'} branch has probability {weight:.3g}"
        )
    new = _normalize(branch, weight)
    norm_error = abs(float(np.linalg.norm(new)) - 1.0)
    return new, StepOutcome(attempt, bool(success), p, norm_error)


def run(
    initial_state: np.ndarray,
    emb: HermitianEmbedding,
    target_successes: int,
    rng: np.random.Generator | None = None,
    snapshot_schedule: Iterable[int] = (),
    mode: Mode | Callable[[int], Mode] = Mode.SAMPLED,
    seed: int | None = None,
    max_attempts: int | None = None,
    on_success: Callable[[int, np.ndarray], None] | None = None,
) -> RunLog:
    """March until ``target_successes`` steps have succeeded.

    A failed attempt leaves the (near-identity) failure branch as the new
    state and the loop simply tries again.  ``mode`` may be a callable
    mapping the attempt index to a mode, e.g. to force early failures.
    Snapshots are keyed by the number of successful steps.
    """
    if target_successes < 1:
        raise ValueError("target_successes must be at least 1")
    if rng is None:
        rng = make_rng(seed)
    if max_attempts is None:
        max_attempts = 100 * target_successes
    schedule = set(snapshot_schedule)
    choose = mode if callable(mode) else (lambda _attempt, m=Mode(mode): m)

    log = RunLog(seed=seed)
    state = np.asarray(initial_state)
    if 0 in schedule:
        log.snapshots[0] = state.copy()
    successes = 0
    attempt = 0
    while successes < target_successes:
        if attempt >= max_attempts:
            raise AttemptBudgetExceeded(
                f"{attempt} attempts produced only {successes}/{target_successes} successes"
            )
        state, outcome = step(state, emb, rng, choose(attempt), attempt)
        log.outcomes.append(outcome)
        attempt += 1
        if outcome.success:
            successes += 1
            if successes in schedule:
                log.snapshots[successes] = state.copy()
            if on_success is not None:
                on_success(successes, state)
    log.final_state = state
    return log
