"""Failure-detector specifications: validators, samplers, and oracle runtimes.

Six detector kinds are supported.  The anonymous ones output data that never
names a process:

* ``crash-count``          -- always-accurate count of crashed processes
* ``eventual-crash-count`` -- the count is only eventually accurate
* ``self-trust``           -- eventually exactly one correct process trusts itself

and the classic, identity-revealing ones used by the translations:

* ``perfect`` / ``eventually-perfect`` -- suspected-process sets
* ``leader``                           -- eventual common correct leader

Every "eventually ..." clause is evaluated against the history's constant
tail: with post-crash cells of crashed processes exempt (their modules are
never read again), an existential convergence point exists iff the tail cells
of the relevant processes satisfy the clause.  Validators therefore never
trust a recorded convergence step; they recompute from the table.

Samplers keep count-kind outputs within the currently-crashed count at live
cells.  Looser histories (e.g. reporting a crash before it happens) are still
valid per the definitions and the validators accept them, but the consensus
and translation algorithms are only guaranteed correct against oracles that
never under-count the currently-alive processes, so the samplers stay inside
that envelope.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any

from .model import DetectorHistory, FailurePattern

CRASH_COUNT = "crash-count"
EVENTUAL_CRASH_COUNT = "eventual-crash-count"
SELF_TRUST = "self-trust"
PERFECT = "perfect"
EVENTUALLY_PERFECT = "eventually-perfect"
LEADER = "leader"

COUNT_KINDS = (CRASH_COUNT, EVENTUAL_CRASH_COUNT)
ALL_KINDS = (CRASH_COUNT, EVENTUAL_CRASH_COUNT, SELF_TRUST, PERFECT, EVENTUALLY_PERFECT, LEADER)

BEHAVIORS = ("optimistic", "pessimistic", "adversarial")


def _check_count_range(history: DetectorHistory) -> None:
    for p in range(1, history.n + 1):
        for v in history.row(p):
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= history.n:
                raise ValueError(f"count history cell out of range 0..{history.n}: {v!r}")


def _check_flag_range(history: DetectorHistory) -> None:
    for p in range(1, history.n + 1):
        for v in history.row(p):
            if not isinstance(v, bool):
                raise ValueError(f"self-trust history cell is not a bool: {v!r}")


def _check_set_range(history: DetectorHistory) -> None:
    procs = set(range(1, history.n + 1))
    for p in range(1, history.n + 1):
        for v in history.row(p):
            if not isinstance(v, frozenset) or not v <= procs:
                raise ValueError(f"suspect-set history cell is not a subset of P: {v!r}")


def _check_pid_range(history: DetectorHistory) -> None:
    for p in range(1, history.n + 1):
        for v in history.row(p):
            if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= history.n:
                raise ValueError(f"leader history cell is not a process index: {v!r}")


def validate_crash_count(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Completeness (eventually >= |crashed|) plus permanent accuracy (<=)."""
    _check_count_range(history)
    crashed = len(pattern.crashed)
    h = history.horizon
    for q in pattern.correct:
        row = history.row(q)
        if row[h] < crashed:  # tail must witness completeness
            return False
        if any(v > crashed for v in row):
            return False
    return True


def validate_eventual_crash_count(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Completeness plus eventual accuracy: both reduce to the tail cells."""
    _check_count_range(history)
    crashed = len(pattern.crashed)
    return all(history.at(q, history.horizon) == crashed for q in pattern.correct)


def validate_self_trust(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Eventually exactly one correct process outputs true, forever."""
    _check_flag_range(history)
    trusting = [q for q in pattern.correct if history.at(q, history.horizon)]
    return len(trusting) == 1


def validate_perfect(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Strong completeness and strong accuracy (never suspected before crashing)."""
    _check_set_range(history)
    crashed = pattern.crashed
    for q in pattern.correct:
        if not crashed <= history.at(q, history.horizon):
            return False
    for p in range(1, history.n + 1):
        crash = pattern.crash_step(p)
        limit = history.horizon if crash is None else min(history.horizon, crash - 1)
        for t in range(limit + 1):
            for q in history.at(p, t):
                step = pattern.crash_step(q)
                if step is None or step > t:
                    return False
        # the constant tail repeats forever: a tail suspicion of a process
        # that crashes after the horizon would precede its crash
        if crash is None:
            for q in history.at(p, history.horizon):
                step = pattern.crash_step(q)
                if step is None or step > history.horizon:
                    return False
    return True


def validate_eventually_perfect(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Strong completeness and eventual strong accuracy."""
    _check_set_range(history)
    crashed = pattern.crashed
    return all(history.at(q, history.horizon) == crashed for q in pattern.correct)


def validate_leader(history: DetectorHistory, pattern: FailurePattern) -> bool:
    """Eventually all correct processes output the same correct process."""
    _check_pid_range(history)
    tails = {history.at(q, history.horizon) for q in pattern.correct}
    return len(tails) == 1 and next(iter(tails)) in pattern.correct


_VALIDATORS = {
    CRASH_COUNT: validate_crash_count,
    EVENTUAL_CRASH_COUNT: validate_eventual_crash_count,
    SELF_TRUST: validate_self_trust,
    PERFECT: validate_perfect,
    EVENTUALLY_PERFECT: validate_eventually_perfect,
    LEADER: validate_leader,
}


@dataclass(frozen=True)
class DetectorSpec:
    """A detector kind bound to a system size; provides `validates`."""

    kind: str
    n: int

    def __post_init__(self) -> None:
        if self.kind not in _VALIDATORS:
            raise ValueError(f"unknown detector kind {self.kind!r}")

    def validates(self, history: DetectorHistory, pattern: FailurePattern) -> bool:
        if history.n != self.n or pattern.n != self.n:
            raise ValueError("history/pattern size does not match the spec")
        return _VALIDATORS[self.kind](history, pattern)


@dataclass(frozen=True)
class LowestCrashedIndex:
    """Deliberately identity-revealing detector: outputs the lowest-index
    crashed process (or 0 when nothing crashed).  Its histories are valid per
    its own rule but not closed under permutation, which is what the
    anonymity checker must detect.
    """

    n: int
    kind: str = "lowest-crashed"

    def expected(self, pattern: FailurePattern) -> int:
        return min(pattern.crashed, default=0)

    def validates(self, history: DetectorHistory, pattern: FailurePattern) -> bool:
        want = self.expected(pattern)
        return all(v == want for p in range(1, self.n + 1) for v in history.row(p))

    def history(self, pattern: FailurePattern, horizon: int) -> DetectorHistory:
        want = self.expected(pattern)
        row = tuple([want] * (horizon + 1))
        return DetectorHistory(self.kind, self.n, horizon, tuple([row] * self.n))


def alive_view(history: DetectorHistory) -> DetectorHistory:
    """The complementary table the algorithms read: alive(q,t) = n - H(q,t)."""
    _check_count_range(history)
    n = history.n
    rows = tuple(tuple(n - v for v in row) for row in history.rows)
    return DetectorHistory("alive-count", n, history.horizon, rows, history.convergence)


@dataclass(frozen=True)
class OracleProfile:
    """How a sampled history behaves before its eventual clauses kick in.

    behavior:
      optimistic   -- truthful from the start (current crashed set / stable leader)
      pessimistic  -- over-suspects before convergence (everything it may)
      adversarial  -- worst case for waiting algorithms: eventual-count reads 0
                      crashed (everyone alive), counts jitter randomly where
                      accuracy permits, self-trust flags flip at random
    convergence: step from which the eventual clauses hold (pushed past the
    last crash automatically).
    """

    behavior: str = "adversarial"
    convergence: int = 0

    def __post_init__(self) -> None:
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown profile behavior {self.behavior!r}")
        if self.convergence < 0:
            raise ValueError("convergence step must be >= 0")


def sample_history(
    spec: DetectorSpec,
    pattern: FailurePattern,
    profile: OracleProfile,
    seed: int,
    horizon: int,
) -> DetectorHistory:
    """Draw a valid history for `pattern`, seeded and reproducible.

    Raises for infeasible setups: convergence or crash steps beyond the
    horizon cannot be witnessed by a finite table.
    """
    if pattern.n != spec.n:
        raise ValueError("pattern size does not match the spec")
    if profile.convergence > horizon:
        raise ValueError(f"convergence {profile.convergence} beyond horizon {horizon}")
    if pattern.crash_steps and pattern.last_crash > horizon:
        raise ValueError(f"crash at step {pattern.last_crash} beyond horizon {horizon}")

    rng = random.Random(f"{seed}/{spec.kind}/{profile.behavior}/{profile.convergence}")
    n = spec.n
    conv = max(profile.convergence, pattern.last_crash)
    crashed = pattern.crashed
    crashed_total = len(crashed)
    current = [len(pattern.at(t)) for t in range(horizon + 1)]

    def count_cell(p: int, t: int) -> int:
        live = pattern.crash_step(p) is None or t < pattern.crash_step(p)
        if not live:
            return rng.randint(0, n) if profile.behavior == "adversarial" else current[t]
        if t >= conv:
            return crashed_total
        if profile.behavior == "optimistic":
            return current[t]
        if spec.kind == CRASH_COUNT:
            # permanent accuracy caps live cells at the current count
            if profile.behavior == "pessimistic":
                return current[t]
            return rng.randint(0, current[t])
        # eventual accuracy: anything in range goes before convergence
        if profile.behavior == "pessimistic":
            return n
        return 0  # claims everyone alive: maximal waiting downstream

    def self_trust_rows() -> tuple[tuple[bool, ...], ...]:
        leader = rng.choice(sorted(pattern.correct))
        rows = []
        for p in range(1, n + 1):
            row = []
            for t in range(horizon + 1):
                if p in crashed:
                    row.append(rng.random() < 0.5 if profile.behavior == "adversarial" else False)
                elif t >= conv or profile.behavior == "optimistic":
                    row.append(p == leader)
                elif profile.behavior == "pessimistic":
                    row.append(False)
                else:
                    row.append(rng.random() < 0.5)
            rows.append(tuple(row))
        return tuple(rows)

    def suspect_cell(p: int, t: int) -> frozenset[int]:
        if t >= conv:
            return crashed if spec.kind == EVENTUALLY_PERFECT else pattern.at(t)
        if profile.behavior == "optimistic":
            return pattern.at(t)
        if spec.kind == PERFECT:
            # strong accuracy binds every pre-crash cell
            pool = sorted(pattern.at(t))
            if profile.behavior == "pessimistic":
                return pattern.at(t)
            return frozenset(q for q in pool if rng.random() < 0.5)
        if profile.behavior == "pessimistic":
            return frozenset(range(1, n + 1))
        return frozenset(q for q in range(1, n + 1) if rng.random() < 0.3)

    def leader_cell(p: int, t: int, leader: int) -> int:
        if t >= conv or profile.behavior == "optimistic":
            return leader
        if profile.behavior == "pessimistic":
            return p
        return rng.randint(1, n)

    if spec.kind in COUNT_KINDS:
        rows = tuple(
            tuple(count_cell(p, t) for t in range(horizon + 1)) for p in range(1, n + 1)
        )
    elif spec.kind == SELF_TRUST:
        rows = self_trust_rows()
    elif spec.kind in (PERFECT, EVENTUALLY_PERFECT):
        rows = tuple(
            tuple(suspect_cell(p, t) for t in range(horizon + 1)) for p in range(1, n + 1)
        )
    elif spec.kind == LEADER:
        leader = rng.choice(sorted(pattern.correct))
        rows = tuple(
            tuple(leader_cell(p, t, leader) for t in range(horizon + 1))
            for p in range(1, n + 1)
        )
    else:  # pragma: no cover - guarded by DetectorSpec
        raise ValueError(spec.kind)

    return DetectorHistory(spec.kind, n, horizon, rows, convergence=conv)


class OracleRuntime:
    """Reveals a pre-drawn valid history to a running simulation."""

    def __init__(self, spec: DetectorSpec, history: DetectorHistory):
        self.spec = spec
        self.history = history

    def read(self, p: int, t: int, crashed: frozenset[int]) -> Any:
        return self.history.at(p, t)


class LiveOracle:
    """Truthful oracle computed from the simulation's current crashed set.

    Used by exhaustive exploration, where crash placements are chosen
    dynamically and a pre-drawn table cannot stay consistent with them.
    Count kinds report the number crashed so far, self-trust points at the
    lowest-index live process, leader outputs it.
    """

    def __init__(self, kind: str, n: int):
        if kind not in ALL_KINDS:
            raise ValueError(f"unknown detector kind {kind!r}")
        self.kind = kind
        self.n = n

    def read(self, p: int, t: int, crashed: frozenset[int]) -> Any:
        if self.kind in COUNT_KINDS:
            return len(crashed)
        live_min = min(q for q in range(1, self.n + 1) if q not in crashed)
        if self.kind == SELF_TRUST:
            return p == live_min
        if self.kind == LEADER:
            return live_min
        return frozenset(crashed)
