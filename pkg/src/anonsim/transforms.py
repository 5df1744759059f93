"""Detector-to-detector emulations.

Each transformation runs an automaton per process that maintains an output
variable; the per-process output series assembled over a whole trace must
validate against the target detector for the run's failure pattern.

Message-passing transformations (sender attribution required):

* ``EventualSuspector`` -- rounds of ALIVE broadcasts; whoever is missing
  from the current round's sender set is suspected.  Builds an
  eventually-perfect detector from an eventual crash count.
* ``StableSuspector``   -- same silence principle, but the suspect set only
  updates after the sender set has stayed identical for f+2 rounds, which
  rules out suspecting a live process.  Needs the always-accurate count.
* ``SelfTrustAnnouncer``-- the process whose self-trust flag is up announces
  itself; everyone adopts the latest announcement, emulating a leader oracle.

Anonymous randomized transformation:

* ``MaxIdSelfTrust`` -- every process draws a random identifier, heartbeats
  it each round, and trusts itself iff its own identifier is the largest one
  heard this round.  Distinct identifiers make the largest-id correct process
  the eventual unique self-truster; a collision is the priced-in failure mode.

Table-to-table translations (no messages needed) are plain functions:
suspect-set sizes emulate crash counts, and a leader table restricted to
"am I the leader" emulates self-trust.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .detectors import (
    CRASH_COUNT,
    EVENTUAL_CRASH_COUNT,
    EVENTUALLY_PERFECT,
    LEADER,
    PERFECT,
    SELF_TRUST,
)
from .model import DetectorHistory
from .simulator import Automaton, Ctx, ScenarioConfig, Trace


def _require_identified(scenario: ScenarioConfig, name: str) -> None:
    if not scenario.identified:
        raise ValueError(f"{name} attributes receptions to senders; run it in identified mode")


@dataclass
class EventualSuspector(Automaton):
    """suspect = P minus the senders heard this round (eventually accurate)."""

    n: int
    f: int
    proc: int
    rounds_cap: int | None
    r: int = 1
    suspect: frozenset = frozenset()
    phase: str = "send"
    started: bool = False

    def key(self) -> tuple:
        return (self.r, tuple(sorted(self.suspect)), self.phase, self.started)

    def on_poll(self, ctx: Ctx) -> bool:
        if self.phase == "done":
            return False
        if self.phase == "send":
            if not self.started:
                self.started = True
                ctx.switch_round(self.r)
                ctx.emit_output(self.suspect)
            if self.rounds_cap is not None and self.r > self.rounds_cap:
                ctx.halt()
                self.phase = "done"
                return True
            ctx.broadcast(("ALIVE", self.r), round_tag=self.r)
            self.phase = "wait"
            return True
        senders = set(ctx.senders(self.r, "ALIVE"))
        if len(senders) < ctx.alive_count():
            return False
        self.suspect = frozenset(range(1, self.n + 1)) - senders
        ctx.emit_output(self.suspect)
        self.r += 1
        ctx.switch_round(self.r)
        self.phase = "send"
        return True


@dataclass
class StableSuspector(Automaton):
    """Suspect only after the sender set held still for f+2 rounds."""

    n: int
    f: int
    proc: int
    rounds_cap: int | None
    r: int = 0
    suspect: frozenset = frozenset()
    earlier_alive: frozenset = frozenset()
    last_change: int = 0
    phase: str = "send"
    started: bool = False

    def key(self) -> tuple:
        return (
            self.r,
            tuple(sorted(self.suspect)),
            tuple(sorted(self.earlier_alive)),
            self.last_change,
            self.phase,
            self.started,
        )

    def _stable_enough(self) -> bool:
        return self.r >= self.last_change + self.f + 2

    def on_poll(self, ctx: Ctx) -> bool:
        if self.phase == "done":
            return False
        if self.phase == "send":
            if not self.started:
                self.started = True
                ctx.switch_round(self.r)
                ctx.emit_output(self.suspect)
            if self.rounds_cap is not None and self.r > self.rounds_cap:
                ctx.halt()
                self.phase = "done"
                return True
            ctx.broadcast(("ALIVE", self.r), round_tag=self.r)
            self.phase = "wait"
            return True
        senders = set(ctx.senders(self.r, "ALIVE"))
        need = ctx.alive_count()
        if len(senders) < need:
            return False
        # the count is the binding cardinality: take exactly `need` senders
        alive = frozenset(sorted(senders)[:need])
        if alive != self.earlier_alive:
            self.last_change = self.r
        elif self._stable_enough():
            self.suspect = frozenset(range(1, self.n + 1)) - alive
            ctx.emit_output(self.suspect)
        self.earlier_alive = alive
        self.r += 1
        ctx.switch_round(self.r)
        self.phase = "send"
        return True


@dataclass
class SelfTrustAnnouncer(Automaton):
    """Tell everyone when the oracle trusts you; adopt the latest claim."""

    n: int
    f: int
    proc: int
    ticks_cap: int | None
    output: int = 0  # leader estimate; starts as self
    ticks: int = 0
    last_claim: int = -8
    claims_seen: int = 0
    started: bool = False
    halted: bool = False

    def key(self) -> tuple:
        return (self.output, self.ticks, self.last_claim, self.claims_seen, self.started, self.halted)

    def on_poll(self, ctx: Ctx) -> bool:
        if self.halted:
            return False
        self.ticks += 1
        progressed = False
        if not self.started:
            self.started = True
            self.output = self.proc
            ctx.emit_output(self.output)
            progressed = True
        claims = [m for m in ctx.untagged() if m[0] == "Claim"]
        if len(claims) > self.claims_seen:
            self.claims_seen = len(claims)
            latest = claims[-1][1]
            if latest != self.output:
                self.output = latest
                ctx.emit_output(self.output)
            progressed = True
        if self.ticks_cap is not None and self.ticks >= self.ticks_cap:
            ctx.halt()
            self.halted = True
            return True
        # throttled re-announcement: stale claims from before the oracle
        # stabilized must be outnumbered, not outrun
        if ctx.oracle() is True and self.ticks - self.last_claim >= 8:
            self.last_claim = self.ticks
            if self.output != self.proc:
                self.output = self.proc
                ctx.emit_output(self.output)
            ctx.broadcast(("Claim", self.proc))
            progressed = True
        return progressed


@dataclass
class MaxIdSelfTrust(Automaton):
    """Trust yourself iff your random identifier tops this round's heartbeats."""

    n: int
    f: int
    proc: int
    my_id: int
    rounds_cap: int | None
    r: int = 1
    output: bool = True  # the rule applied to the singleton {own id}
    phase: str = "send"
    started: bool = False

    def key(self) -> tuple:
        return (self.r, self.my_id, self.output, self.phase, self.started)

    def on_poll(self, ctx: Ctx) -> bool:
        if self.phase == "done":
            return False
        if self.phase == "send":
            if not self.started:
                self.started = True
                ctx.switch_round(self.r)
                ctx.emit_output(self.output)
            if self.rounds_cap is not None and self.r > self.rounds_cap:
                ctx.halt()
                self.phase = "done"
                return True
            ctx.broadcast(("HB", self.r, self.my_id), round_tag=self.r)
            self.phase = "wait"
            return True
        beats = [m for m in ctx.msgs(self.r) if m[0] == "HB"]
        if len(beats) < ctx.alive_count():
            return False
        self.output = self.my_id == max(m[2] for m in beats)
        ctx.emit_output(self.output)
        self.r += 1
        ctx.switch_round(self.r)
        self.phase = "send"
        return True


# --- factories ----------------------------------------------------------------

DEFAULT_ID_BITS = 64


def eventual_suspector(scenario: ScenarioConfig, proc: int, rng) -> EventualSuspector:
    _require_identified(scenario, "the eventual suspector")
    cfg = scenario.cfg
    return EventualSuspector(n=cfg.n, f=cfg.f, proc=proc, rounds_cap=scenario.rounds)


def stable_suspector(scenario: ScenarioConfig, proc: int, rng) -> StableSuspector:
    _require_identified(scenario, "the stable suspector")
    cfg = scenario.cfg
    return StableSuspector(n=cfg.n, f=cfg.f, proc=proc, rounds_cap=scenario.rounds)


def self_trust_announcer(scenario: ScenarioConfig, proc: int, rng) -> SelfTrustAnnouncer:
    _require_identified(scenario, "the self-trust announcer")
    cfg = scenario.cfg
    cap = 8 * scenario.rounds if scenario.rounds is not None else None
    return SelfTrustAnnouncer(n=cfg.n, f=cfg.f, proc=proc, ticks_cap=cap, output=proc)


def max_id_self_trust(scenario: ScenarioConfig, proc: int, rng) -> MaxIdSelfTrust:
    if scenario.identified:
        raise ValueError("the randomized self-trust construction is an anonymous protocol")
    cfg = scenario.cfg
    return MaxIdSelfTrust(
        n=cfg.n,
        f=cfg.f,
        proc=proc,
        my_id=rng.getrandbits(DEFAULT_ID_BITS),
        rounds_cap=scenario.rounds,
    )


def forced_id_factory(ids: dict[int, int]) -> Callable:
    """Factory with pinned identifiers, for exercising the collision failure mode."""

    def factory(scenario: ScenarioConfig, proc: int, rng) -> MaxIdSelfTrust:
        auto = max_id_self_trust(scenario, proc, rng)
        auto.my_id = ids[proc]
        return auto

    return factory


@dataclass(frozen=True)
class Transformation:
    """Emulation of a target detector on top of a source oracle."""

    name: str
    source: str
    target: str
    identified: bool
    factory: Callable


EVENTUAL_SUSPECTOR = Transformation(
    "eventual-suspector", EVENTUAL_CRASH_COUNT, EVENTUALLY_PERFECT, True, eventual_suspector
)
STABLE_SUSPECTOR = Transformation("stable-suspector", CRASH_COUNT, PERFECT, True, stable_suspector)
LEADER_ANNOUNCE = Transformation("leader-announce", SELF_TRUST, LEADER, True, self_trust_announcer)
RANDOM_SELF_TRUST = Transformation(
    "random-selftrust", CRASH_COUNT, SELF_TRUST, False, max_id_self_trust
)

TRANSFORMATIONS = {
    t.name: t for t in (EVENTUAL_SUSPECTOR, STABLE_SUSPECTOR, LEADER_ANNOUNCE, RANDOM_SELF_TRUST)
}

_OUTPUT_DEFAULTS: dict[str, Callable[[int, int], Any]] = {
    EVENTUALLY_PERFECT: lambda p, n: frozenset(),
    PERFECT: lambda p, n: frozenset(),
    LEADER: lambda p, n: p,
    SELF_TRUST: lambda p, n: False,
}


def _cell(kind: str, value: Any) -> Any:
    if kind in (PERFECT, EVENTUALLY_PERFECT) and isinstance(value, list):
        return frozenset(value)
    return value


def output_history(trace: Trace, target_kind: str, name: str = "") -> DetectorHistory:
    """Assemble the emulated target history from a trace's output events."""
    n = trace.scenario.cfg.n
    horizon = max((ev["step"] for ev in trace.events), default=0)
    rows = []
    for p in range(1, n + 1):
        series = [(step, _cell(target_kind, value)) for step, value in trace.outputs(p)]
        row = []
        value = _OUTPUT_DEFAULTS[target_kind](p, n)
        i = 0
        for t in range(horizon + 1):
            while i < len(series) and series[i][0] <= t:
                value = series[i][1]
                i += 1
            row.append(value)
        rows.append(tuple(row))
    return DetectorHistory(
        kind=target_kind,
        n=n,
        horizon=horizon,
        rows=tuple(rows),
        emulated_from=(trace.scenario.oracle_kind, name or trace.scenario.algorithm, trace.scenario.seed),
    )


def emulated_output(trace: Trace, transformation: Transformation) -> DetectorHistory:
    return output_history(trace, transformation.target, transformation.name)


def id_collision(trace: Trace) -> bool:
    """Whether two heartbeat identifiers in the trace coincide."""
    ids = {ev["payload"][2] for ev in trace.events if ev["ev"] == "send" and ev["payload"][0] == "HB"}
    senders = {ev["proc"] for ev in trace.events if ev["ev"] == "send" and ev["payload"][0] == "HB"}
    return len(ids) < len(senders)


# --- table-to-table translations ------------------------------------------------


def suspected_count(history: DetectorHistory) -> DetectorHistory:
    """Suspect-set sizes as a crash count: perfect -> crash-count and
    eventually-perfect -> eventual-crash-count."""
    if history.kind not in (PERFECT, EVENTUALLY_PERFECT):
        raise ValueError(f"expected a suspect-set history, got kind {history.kind!r}")
    target = CRASH_COUNT if history.kind == PERFECT else EVENTUAL_CRASH_COUNT
    rows = tuple(tuple(len(v) for v in row) for row in history.rows)
    return DetectorHistory(
        target,
        history.n,
        history.horizon,
        rows,
        convergence=history.convergence,
        emulated_from=(history.kind, "suspected-count", 0),
    )


def leader_self_trust(history: DetectorHistory) -> DetectorHistory:
    """Restrict a leader table to "is it me": leader -> self-trust."""
    if history.kind != LEADER:
        raise ValueError(f"expected a leader history, got kind {history.kind!r}")
    rows = tuple(
        tuple(v == p for v in row) for p, row in enumerate(history.rows, start=1)
    )
    return DetectorHistory(
        SELF_TRUST,
        history.n,
        history.horizon,
        rows,
        convergence=history.convergence,
        emulated_from=(history.kind, "leader-self-trust", 0),
    )


def count_weakening(history: DetectorHistory) -> DetectorHistory:
    """Identity embedding: every always-accurate count is an eventual one."""
    if history.kind != CRASH_COUNT:
        raise ValueError(f"expected a crash-count history, got kind {history.kind!r}")
    return DetectorHistory(
        EVENTUAL_CRASH_COUNT,
        history.n,
        history.horizon,
        history.rows,
        convergence=history.convergence,
        emulated_from=(history.kind, "count-weakening", 0),
    )


TRANSLATIONS = {
    "suspected-count": (PERFECT, CRASH_COUNT, suspected_count),
    "eventual-suspected-count": (EVENTUALLY_PERFECT, EVENTUAL_CRASH_COUNT, suspected_count),
    "leader-self-trust": (LEADER, SELF_TRUST, leader_self_trust),
    "count-weakening": (CRASH_COUNT, EVENTUAL_CRASH_COUNT, count_weakening),
}
