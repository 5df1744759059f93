"""Deterministic discrete-event execution of process automata.

One simulation instance is strictly single-threaded: a global step counter
advances once per scheduler action, and every source of nondeterminism
(scheduling, oracle sampling, per-process randomness) is derived from the
scenario seed, so (scenario, seed) -> trace is a pure function.

Channels are reliable: a broadcast reaches every process that has not
crashed, including the sender itself, whose copy is delivered immediately
(the count thresholds the algorithms wait for include their own message).
Remote copies sit in a pending pool until the scheduler picks them, which is
where asynchrony and adversarial delivery orders come from.  Messages carry
an optional round tag; a receiver only sees tags matching its current round
(later rounds stay buffered, earlier rounds are discarded at round switch).

`explore` enumerates every schedule of a small scenario as a graph search
over simulation states: delivery interleavings, process start orders and
crash placements are all branching choices.  Local computation runs eagerly
to its next blocking wait after each choice, which is sound here because an
automaton only observes its own inbox and the oracle.
"""

from __future__ import annotations

import json
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable

from .detectors import (
    ALL_KINDS,
    DetectorSpec,
    LiveOracle,
    OracleProfile,
    OracleRuntime,
    sample_history,
)
from .model import FailurePattern, ReceiveLog, SystemConfig, correct_set

SCHEMA = 1
POLICIES = ("fifo", "random", "crash-adjacent")

Payload = tuple
AutomatonFactory = Callable[["ScenarioConfig", int, random.Random], Any]


def default_horizon(cfg: SystemConfig) -> int:
    return 50 * (cfg.f + 2) * cfg.n


class ScenarioError(ValueError):
    """A scenario that violates the model invariants or the config schema."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a reproducible run needs: who, what, when, and the seed."""

    cfg: SystemConfig
    algorithm: str
    inputs: tuple[int, ...]
    pattern: FailurePattern
    oracle_kind: str
    profile: OracleProfile = OracleProfile()
    policy: str = "fifo"
    seed: int = 0
    horizon: int | None = None
    rounds: int | None = None  # self-halt cap for non-terminating automata
    identified: bool = False

    @property
    def effective_horizon(self) -> int:
        return self.horizon if self.horizon is not None else default_horizon(self.cfg)

    def validate(self) -> None:
        horizon = self.effective_horizon
        if horizon < 1:
            raise ScenarioError("horizon must be at least 1")
        if self.policy not in POLICIES:
            raise ScenarioError(f"unknown policy {self.policy!r} (choose from {POLICIES})")
        if self.oracle_kind not in ALL_KINDS:
            raise ScenarioError(f"unknown oracle kind {self.oracle_kind!r}")
        try:
            correct_set(self.pattern, self.cfg)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        if self.pattern.crash_steps and self.pattern.last_crash >= horizon:
            raise ScenarioError(
                f"crash at step {self.pattern.last_crash} would never happen "
                f"within horizon {horizon}"
            )
        if self.profile.convergence > horizon:
            raise ScenarioError("oracle convergence lies beyond the horizon")
        if self.inputs and len(self.inputs) != self.cfg.n:
            raise ScenarioError(f"{len(self.inputs)} inputs for {self.cfg.n} processes")
        if any(v not in (0, 1) for v in self.inputs):
            raise ScenarioError("inputs must be binary")

    def reseeded(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "algorithm": self.algorithm,
            "n": self.cfg.n,
            "f": self.cfg.f,
            "inputs": list(self.inputs),
            "crash": {str(p): s for p, s in self.pattern.crash_steps},
            "oracle": {
                "kind": self.oracle_kind,
                "behavior": self.profile.behavior,
                "convergence": self.profile.convergence,
            },
            "policy": self.policy,
            "seed": self.seed,
            "horizon": self.horizon,
            "rounds": self.rounds,
            "identified": self.identified,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        try:
            cfg = SystemConfig(n=int(doc["n"]), f=int(doc["f"]))
            oracle = doc.get("oracle", {})
            scenario = cls(
                cfg=cfg,
                algorithm=str(doc["algorithm"]),
                inputs=tuple(int(v) for v in doc.get("inputs", [])),
                pattern=FailurePattern.of(
                    cfg.n, {int(p): int(s) for p, s in doc.get("crash", {}).items()}
                ),
                oracle_kind=str(oracle.get("kind", "")),
                profile=OracleProfile(
                    behavior=str(oracle.get("behavior", "adversarial")),
                    convergence=int(oracle.get("convergence", 0)),
                ),
                policy=str(doc.get("policy", "fifo")),
                seed=int(doc.get("seed", 0)),
                horizon=doc.get("horizon"),
                rounds=doc.get("rounds"),
                identified=bool(doc.get("identified", False)),
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        scenario.validate()
        return scenario


class Inbox:
    """Round-tagged message store for one receiver.

    Messages for future rounds stay buffered until the process reaches that
    round; switching to round r discards everything tagged below r.
    Untagged messages (decision announcements) are always visible.
    """

    def __init__(self) -> None:
        self.by_round: dict[int, list[tuple[int, Payload]]] = {}
        self.untagged: list[tuple[int, Payload]] = []
        self.floor = 0
        self._key: tuple | None = None

    def deliver(self, sender: int, payload: Payload, round_tag: int | None) -> None:
        self._key = None
        if round_tag is None:
            self.untagged.append((sender, payload))
        elif round_tag >= self.floor:
            self.by_round.setdefault(round_tag, []).append((sender, payload))

    def advance(self, new_floor: int) -> None:
        if new_floor > self.floor:
            self._key = None
            self.floor = new_floor
            for r in [r for r in self.by_round if r < new_floor]:
                del self.by_round[r]

    def payloads(self, r: int) -> list[Payload]:
        return [payload for _, payload in self.by_round.get(r, [])]

    def senders(self, r: int, tag: str) -> list[int]:
        return [s for s, payload in self.by_round.get(r, []) if payload[0] == tag]

    def untagged_payloads(self) -> list[Payload]:
        return [payload for _, payload in self.untagged]

    def clone(self) -> "Inbox":
        other = Inbox()
        other.by_round = {r: list(items) for r, items in self.by_round.items()}
        other.untagged = list(self.untagged)
        other.floor = self.floor
        other._key = self._key
        return other

    def key(self, identified: bool) -> tuple:
        if self._key is None or self._key[0] is not identified:
            if identified:
                rounds = tuple(
                    (r, tuple(sorted(items, key=_sortable)))
                    for r, items in sorted(self.by_round.items())
                )
                extra = tuple(sorted(self.untagged, key=_sortable))
            else:
                rounds = tuple(
                    (r, tuple(sorted((payload for _, payload in items), key=_sortable)))
                    for r, items in sorted(self.by_round.items())
                )
                extra = tuple(sorted((payload for _, payload in self.untagged), key=_sortable))
            self._key = (identified, (self.floor, rounds, extra))
        return self._key[1]


_SORTABLE_CACHE: dict[Any, Any] = {}


def _sortable(value: Any) -> Any:
    """Total order over payload-ish values; None and ints do not compare raw."""
    try:
        return _SORTABLE_CACHE[value]
    except KeyError:
        pass
    except TypeError:
        return (5, repr(value))
    if value is None:
        rank = (0, 0)
    elif isinstance(value, bool):
        rank = (1, int(value))
    elif isinstance(value, int):
        rank = (2, value)
    elif isinstance(value, str):
        rank = (3, value)
    elif isinstance(value, tuple):
        rank = (4, tuple(_sortable(v) for v in value))
    else:
        rank = (5, repr(value))
    if len(_SORTABLE_CACHE) < 1_000_000:
        _SORTABLE_CACHE[value] = rank
    return rank


class Automaton:
    """Base for process automata: state-only objects with a cheap copy."""

    def copy(self):
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.__dict__.pop("_key_cache", None)
        return clone

    def cached_key(self) -> tuple:
        # safe while exploration only mutates fresh copies
        key = self.__dict__.get("_key_cache")
        if key is None:
            key = self.__dict__["_key_cache"] = self.key()
        return key


class Ctx:
    """The view an automaton gets during one poll: inbox, oracle, effects."""

    def __init__(self, engine: Any, proc: int):
        self._engine = engine
        self.proc = proc
        self.n = engine.cfg.n
        self.f = engine.cfg.f

    def oracle(self) -> Any:
        return self._engine.oracle_read(self.proc)

    def alive_count(self) -> int:
        reading = self.oracle()
        if not isinstance(reading, int) or isinstance(reading, bool):
            raise TypeError(f"oracle kind does not report counts: {reading!r}")
        return self.n - reading

    def msgs(self, r: int) -> list[Payload]:
        return self._engine.inboxes[self.proc].payloads(r)

    def senders(self, r: int, tag: str) -> list[int]:
        return self._engine.inboxes[self.proc].senders(r, tag)

    def untagged(self) -> list[Payload]:
        return self._engine.inboxes[self.proc].untagged_payloads()

    def broadcast(self, payload: Payload, round_tag: int | None = None) -> None:
        self._engine.do_broadcast(self.proc, payload, round_tag)

    def decide(self, value: Any, r: int | None = None) -> None:
        self._engine.do_decide(self.proc, value, r)

    def halt(self) -> None:
        self._engine.do_halt(self.proc)

    def switch_round(self, r: int, **snapshot: Any) -> None:
        self._engine.do_round(self.proc, r, snapshot)

    def emit_output(self, value: Any) -> None:
        self._engine.do_output(self.proc, value)


@dataclass
class Trace:
    """Total record of one run; everything the checkers look at."""

    scenario: ScenarioConfig
    events: list[dict]
    truncated: bool
    pending: int
    decisions: dict[int, list[tuple[int, Any, Any]]]  # proc -> [(step, value, round)]
    crashes: dict[int, int]
    halts: dict[int, int]

    @property
    def correct(self) -> frozenset[int]:
        return frozenset(p for p in self.scenario.cfg.processes if p not in self.crashes)

    def received(self, proc: int) -> Counter:
        return Counter(
            tuple(ev["payload"]) for ev in self.events if ev["ev"] == "deliver" and ev["proc"] == proc
        )

    def sends(self) -> Counter:
        return Counter(tuple(ev["payload"]) for ev in self.events if ev["ev"] == "send")

    def outputs(self, proc: int) -> list[tuple[int, Any]]:
        return [
            (ev["step"], ev["value"])
            for ev in self.events
            if ev["ev"] == "output" and ev["proc"] == proc
        ]

    def receive_log(self) -> ReceiveLog:
        log = ReceiveLog({})
        for ev in self.events:
            if ev["ev"] == "deliver":
                log.record(ev["proc"], ev["from"], ev["step"], tuple(ev["payload"]))
        return log

    def to_jsonl(self) -> str:
        lines = [json.dumps({"ev": "meta", "scenario": self.scenario.to_dict()}, sort_keys=True)]
        for ev in self.events:
            doc = dict(ev)
            if "payload" in doc:
                doc["payload"] = list(doc["payload"])
            lines.append(json.dumps(doc, sort_keys=True))
        lines.append(
            json.dumps({"ev": "end", "truncated": self.truncated, "pending": self.pending}, sort_keys=True)
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or lines[0].get("ev") != "meta" or lines[-1].get("ev") != "end":
            raise ScenarioError("trace file must start with a meta line and end with an end line")
        scenario = ScenarioConfig.from_dict(lines[0]["scenario"])
        events = []
        decisions: dict[int, list] = {}
        crashes: dict[int, int] = {}
        halts: dict[int, int] = {}
        for doc in lines[1:-1]:
            if "payload" in doc:
                doc["payload"] = tuple(doc["payload"])
            events.append(doc)
            if doc["ev"] == "decide":
                decisions.setdefault(doc["proc"], []).append((doc["step"], doc["value"], doc.get("r")))
            elif doc["ev"] == "crash":
                crashes[doc["proc"]] = doc["step"]
            elif doc["ev"] == "halt":
                halts[doc["proc"]] = doc["step"]
        return cls(
            scenario=scenario,
            events=events,
            truncated=bool(lines[-1]["truncated"]),
            pending=int(lines[-1]["pending"]),
            decisions=decisions,
            crashes=crashes,
            halts=halts,
        )


def build_oracle(scenario: ScenarioConfig) -> OracleRuntime:
    spec = DetectorSpec(scenario.oracle_kind, scenario.cfg.n)
    history = sample_history(
        spec,
        scenario.pattern,
        scenario.profile,
        seed=scenario.seed,
        horizon=scenario.effective_horizon,
    )
    return OracleRuntime(spec, history)


class Simulation:
    """Single run of a scenario under its scheduling policy."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        factory: AutomatonFactory,
        oracle: Any = None,
    ):
        scenario.validate()
        self.scenario = scenario
        self.cfg = scenario.cfg
        self.horizon = scenario.effective_horizon
        self.oracle = oracle if oracle is not None else build_oracle(scenario)
        self.rng = random.Random(f"{scenario.seed}/sched")
        self.t = 0
        self.events: list[dict] = []
        self.inboxes = {p: Inbox() for p in self.cfg.processes}
        self.automata = {
            p: factory(scenario, p, random.Random(f"{scenario.seed}/proc/{p}"))
            for p in self.cfg.processes
        }
        self.pending: dict[int, list[tuple[int, Payload, int | None, int]]] = {
            p: [] for p in self.cfg.processes
        }
        self.crashed: set[int] = set()
        self.halted: set[int] = set()
        self.decisions: dict[int, list[tuple[int, Any, Any]]] = {}
        self.crash_log: dict[int, int] = {}
        self.halt_log: dict[int, int] = {}
        self._last_oracle: dict[int, Any] = {}
        self._last_output: dict[int, Any] = {}
        self._seq = 0
        self._rr = 0
        self._crash_at: dict[int, list[int]] = {}
        for p, s in scenario.pattern.crash_steps:
            self._crash_at.setdefault(s, []).append(p)
        self._quiesce_limit = 1000 + 8 * (scenario.rounds or 0)

    # -- hooks used by Ctx ---------------------------------------------------

    def oracle_read(self, p: int) -> Any:
        value = self.oracle.read(p, self.t, frozenset(self.crashed))
        if self._last_oracle.get(p, self) != value:
            self._last_oracle[p] = value
            self.events.append({"step": self.t, "ev": "oracle", "proc": p, "value": value})
        return value

    def do_broadcast(self, p: int, payload: Payload, round_tag: int | None) -> None:
        self.events.append({"step": self.t, "ev": "send", "proc": p, "payload": payload})
        self.inboxes[p].deliver(p, payload, round_tag)
        self.events.append(
            {"step": self.t, "ev": "deliver", "proc": p, "from": p, "payload": payload}
        )
        for q in self.cfg.processes:
            if q == p or q in self.crashed:
                continue
            self._seq += 1
            self.pending[q].append((p, payload, round_tag, self._seq))

    def do_decide(self, p: int, value: Any, r: Any) -> None:
        self.decisions.setdefault(p, []).append((self.t, value, r))
        self.events.append({"step": self.t, "ev": "decide", "proc": p, "value": value, "r": r})

    def do_halt(self, p: int) -> None:
        self.halted.add(p)
        self.halt_log[p] = self.t
        self.events.append({"step": self.t, "ev": "halt", "proc": p})

    def do_round(self, p: int, r: int, snapshot: dict) -> None:
        self.inboxes[p].advance(r)
        self.events.append({"step": self.t, "ev": "round", "proc": p, "r": r, **snapshot})

    def do_output(self, p: int, value: Any) -> None:
        if self._last_output.get(p, self) == value:
            return
        self._last_output[p] = value
        out = sorted(value) if isinstance(value, frozenset) else value
        self.events.append({"step": self.t, "ev": "output", "proc": p, "value": out})

    # -- engine internals ------------------------------------------------------

    def _quiesce(self, p: int) -> None:
        if p in self.crashed or p in self.halted:
            return
        ctx = Ctx(self, p)
        for _ in range(self._quiesce_limit):
            if p in self.crashed or p in self.halted:
                return
            if not self.automata[p].on_poll(ctx):
                return
        raise RuntimeError(f"automaton of process {p} never blocked (runaway loop)")

    def _apply_crashes(self) -> None:
        for p in self._crash_at.get(self.t, []):
            self.crashed.add(p)
            self.crash_log[p] = self.t
            self.pending[p].clear()
            self.events.append({"step": self.t, "ev": "crash", "proc": p})

    def _live_unhalted(self) -> list[int]:
        return [p for p in self.cfg.processes if p not in self.crashed and p not in self.halted]

    def _can_progress(self, p: int) -> bool:
        probe = self.automata[p].copy()
        return probe.on_poll(Ctx(_ProbeEngine(self, self.cfg, self.oracle, self.t), p))

    def _settled(self) -> bool:
        # decided processes may block forever in their final propose phase
        # once their peers halted; the run is complete when every live
        # process halted or decided and nothing can move anymore
        live = self._live_unhalted()
        if any(getattr(self.automata[p], "decided", None) is None for p in live):
            return False
        if any(self.pending[p] for p in live):
            return False
        return not any(self._can_progress(p) for p in live)

    def _done(self) -> bool:
        return self._all_live_halted() or self._settled()

    def _all_live_halted(self) -> bool:
        return not self._live_unhalted()

    def _deliver_index(self, p: int, idx: int) -> None:
        sender, payload, round_tag, _ = self.pending[p].pop(idx)
        self.inboxes[p].deliver(sender, payload, round_tag)
        self.events.append(
            {"step": self.t, "ev": "deliver", "proc": p, "from": sender, "payload": payload}
        )

    def _step_fifo(self) -> None:
        candidates = self._live_unhalted()
        order = sorted(candidates, key=lambda p: ((p - self._rr - 1) % self.cfg.n, p))
        p = order[0]
        self._rr = p
        if self.pending[p]:
            self._deliver_index(p, 0)
        self._quiesce(p)

    def _step_random(self) -> None:
        # delivery and process steps are independent choices, so a wait can
        # fire with more than its threshold already in the inbox
        actions: list[tuple[str, int]] = []
        for p in self._live_unhalted():
            if self.pending[p]:
                actions.append(("deliver", p))
            actions.append(("poll", p))
        kind, p = self.rng.choice(actions)
        if kind == "deliver":
            self._deliver_index(p, self.rng.randrange(len(self.pending[p])))
        else:
            self._quiesce(p)

    def _step_crash_adjacent(self) -> None:
        # post-mortem messages outrace everything else
        best: tuple[int, int, int] | None = None
        for p in self._live_unhalted():
            for idx, (sender, _, _, seq) in enumerate(self.pending[p]):
                if sender in self.crashed and (best is None or seq < best[0]):
                    best = (seq, p, idx)
        if best is not None:
            _, p, idx = best
            self._deliver_index(p, idx)
            self._quiesce(p)
        else:
            self._step_fifo()

    def _drain(self) -> None:
        for p in sorted(self.cfg.processes):
            if p in self.crashed:
                continue
            while self.pending[p]:
                self._deliver_index(p, 0)

    def run(self) -> Trace:
        step = {
            "fifo": self._step_fifo,
            "random": self._step_random,
            "crash-adjacent": self._step_crash_adjacent,
        }[self.scenario.policy]
        while self.t < self.horizon:
            self._apply_crashes()
            if self._done():
                break
            step()
            self.t += 1
        truncated = not self._done()
        pending = sum(len(q) for p, q in self.pending.items() if p not in self.crashed)
        if not truncated:
            self._drain()
            pending = 0
        return Trace(
            scenario=self.scenario,
            events=self.events,
            truncated=truncated,
            pending=pending,
            decisions=self.decisions,
            crashes=self.crash_log,
            halts=self.halt_log,
        )


def run(scenario: ScenarioConfig, factory: AutomatonFactory, oracle: Any = None) -> Trace:
    return Simulation(scenario, factory, oracle).run()


def run_schedule(
    scenario: ScenarioConfig,
    factory: AutomatonFactory,
    schedule: Iterable[tuple],
) -> Trace:
    """Re-execute an explicit explore schedule, producing a full trace.

    Actions are ("wake", p), ("poll", p), ("crash", p) or ("deliver", p,
    sender, payload, round_tag) exactly as explore() reports them; the
    oracle is the same truthful live oracle exploration uses.
    """
    sim = Simulation(scenario, factory, oracle=LiveOracle(scenario.oracle_kind, scenario.cfg.n))
    for action in schedule:
        kind = action[0]
        p = action[1]
        if kind in ("wake", "poll"):
            sim._quiesce(p)
        elif kind == "crash":
            sim.crashed.add(p)
            sim.crash_log[p] = sim.t
            sim.pending[p].clear()
            sim.events.append({"step": sim.t, "ev": "crash", "proc": p})
        elif kind == "deliver":
            _, _, sender, payload, round_tag = action
            payload = tuple(payload)
            idx = next(
                i
                for i, (s, pl, rt, _) in enumerate(sim.pending[p])
                if pl == payload and rt == round_tag and (not scenario.identified or s == sender)
            )
            sim._deliver_index(p, idx)
        else:
            raise ScenarioError(f"unknown schedule action {kind!r}")
        sim.t += 1
    truncated = not sim._done()
    pending = sum(len(q) for p, q in sim.pending.items() if p not in sim.crashed)
    if not truncated:
        sim._drain()
        pending = 0
    return Trace(
        scenario=sim.scenario,
        events=sim.events,
        truncated=truncated,
        pending=pending,
        decisions=sim.decisions,
        crashes=sim.crash_log,
        halts=sim.halt_log,
    )


# --- exhaustive schedule exploration -----------------------------------------


class NullMonitor:
    """Monitor that only summarizes terminal outcomes."""

    def clone(self) -> "NullMonitor":
        return self

    def key(self) -> tuple:
        return ()

    def on_send(self, state: "_XState", p: int, payload: Payload) -> None:
        pass

    def on_decide(self, state: "_XState", p: int, value: Any, r: Any) -> None:
        pass

    def on_round(self, state: "_XState", p: int, r: int) -> None:
        pass

    def on_output(self, state: "_XState", p: int, value: Any) -> None:
        pass

    def on_crash(self, state: "_XState", p: int) -> None:
        pass

    def violation(self) -> str | None:
        return None

    def terminal_checks(self, state: "_XState") -> list[str]:
        return []

    def terminal_profile(self, state: "_XState") -> tuple:
        return (tuple(sorted(state.crashed)),)


class _XState:
    __slots__ = ("automata", "inboxes", "pending", "crashed", "halted", "woken", "crashes_left", "monitor")

    def __init__(self, automata, inboxes, pending, crashed, halted, woken, crashes_left, monitor):
        self.automata = automata
        self.inboxes = inboxes
        self.pending = pending  # list of (receiver, sender, payload, round_tag)
        self.crashed = crashed
        self.halted = halted
        self.woken = woken
        self.crashes_left = crashes_left
        self.monitor = monitor

    def clone(self) -> "_XState":
        # copy-on-write: automata and inboxes are shared until an action
        # touches them (apply() swaps in a private copy first)
        return _XState(
            automata=dict(self.automata),
            inboxes=dict(self.inboxes),
            pending=list(self.pending),
            crashed=set(self.crashed),
            halted=set(self.halted),
            woken=set(self.woken),
            crashes_left=self.crashes_left,
            monitor=self.monitor.clone(),
        )

    def key(self, identified: bool) -> tuple:
        procs = sorted(self.automata)
        return (
            tuple(self.automata[p].cached_key() for p in procs),
            tuple(self.inboxes[p].key(identified) for p in procs),
            tuple(
                sorted(
                    (
                        (m[0], m[1], m[2], m[3]) if identified else (m[0], m[2], m[3])
                        for m in self.pending
                    ),
                    key=_sortable,
                )
            ),
            tuple(sorted(self.crashed)),
            tuple(sorted(self.halted)),
            tuple(sorted(self.woken)),
            self.crashes_left,
            self.monitor.key(),
        )


class _XEngine:
    """Hook adapter letting the explore state drive the same Ctx/automata."""

    def __init__(self, state: _XState, cfg: SystemConfig, oracle: LiveOracle):
        self.state = state
        self.cfg = cfg
        self.oracle = oracle

    @property
    def inboxes(self) -> dict[int, Inbox]:
        return self.state.inboxes

    def oracle_read(self, p: int) -> Any:
        return self.oracle.read(p, 0, frozenset(self.state.crashed))

    def do_broadcast(self, p: int, payload: Payload, round_tag: int | None) -> None:
        st = self.state
        st.monitor.on_send(st, p, payload)
        st.inboxes[p].deliver(p, payload, round_tag)
        for q in self.cfg.processes:
            if q != p and q not in st.crashed and q not in st.halted:
                st.pending.append((q, p, payload, round_tag))

    def do_decide(self, p: int, value: Any, r: Any) -> None:
        self.state.monitor.on_decide(self.state, p, value, r)

    def do_halt(self, p: int) -> None:
        st = self.state
        st.halted.add(p)
        st.pending = [m for m in st.pending if m[0] != p]

    def do_round(self, p: int, r: int, snapshot: dict) -> None:
        self.state.inboxes[p].advance(r)
        self.state.monitor.on_round(self.state, p, r)

    def do_output(self, p: int, value: Any) -> None:
        self.state.monitor.on_output(self.state, p, value)


class _ProbeEngine:
    """Read-only stand-in: lets a cloned automaton evaluate its guards
    against the real inboxes without any effect reaching the host.  The host
    is either an exploration state or a running simulation; both expose
    `inboxes` and `crashed`."""

    def __init__(self, host: Any, cfg: SystemConfig, oracle: Any, t: int = 0):
        self.host = host
        self.cfg = cfg
        self.oracle = oracle
        self.t = t

    @property
    def inboxes(self) -> dict[int, Inbox]:
        return self.host.inboxes

    def oracle_read(self, p: int) -> Any:
        return self.oracle.read(p, self.t, frozenset(self.host.crashed))

    def do_broadcast(self, p: int, payload: Payload, round_tag: int | None) -> None:
        pass

    def do_decide(self, p: int, value: Any, r: Any) -> None:
        pass

    def do_halt(self, p: int) -> None:
        pass

    def do_round(self, p: int, r: int, snapshot: dict) -> None:
        pass

    def do_output(self, p: int, value: Any) -> None:
        pass


@dataclass
class Violation:
    check: str
    detail: str
    schedule: list[tuple]


@dataclass
class ExploreResult:
    states: int
    terminals: int
    violations: list[Violation]
    violation_count: int
    partial: bool
    terminal_profiles: Counter

    @property
    def ok(self) -> bool:
        return self.violation_count == 0 and not self.partial


def explore(
    scenario: ScenarioConfig,
    factory: AutomatonFactory,
    monitor: Any = None,
    max_crashes: int | None = None,
    max_states: int = 1_500_000,
    keep_witnesses: int = 10,
    crash_round_limit: int | None = None,
) -> ExploreResult:
    """Enumerate every schedule of a small scenario (n <= 3).

    Branching choices: which process starts, which pending message class is
    delivered to whom, when a process takes a step (runs from its blocking
    wait to the next one), and where up to `max_crashes` crashes strike.
    Message delivery and process steps are independent choices, so a wait
    can be evaluated with any superset of the messages that first satisfy
    it.  States reached by different interleavings merge: the search is
    over the reachable state graph, with the monitor's accumulated verdicts
    folded into the state identity.  The oracle is the truthful live oracle
    (its reading is a function of the crashes chosen so far).

    `crash_round_limit` restricts crash placements to processes whose round
    counter is still at or below the limit.  Round-capped transformations
    need it: their completeness clauses are eventual, so only crashes that
    leave enough rounds before the cap can be witnessed by the final state.
    """
    scenario.validate()
    if scenario.cfg.n > 3:
        raise ScenarioError("exhaustive exploration is limited to n <= 3")
    if scenario.pattern.crash_steps:
        raise ScenarioError(
            "exploration chooses crash placements itself; use an empty crash map"
        )
    cfg = scenario.cfg
    monitor = monitor if monitor is not None else NullMonitor()
    budget = cfg.f if max_crashes is None else max_crashes
    oracle = LiveOracle(scenario.oracle_kind, cfg.n)
    quiesce_limit = 1000 + 8 * (scenario.rounds or 0)

    def quiesce(state: _XState, p: int) -> None:
        if p in state.crashed or p in state.halted:
            return
        engine = _XEngine(state, cfg, oracle)
        ctx = Ctx(engine, p)
        for _ in range(quiesce_limit):
            if p in state.crashed or p in state.halted:
                return
            if not state.automata[p].on_poll(ctx):
                return
        raise RuntimeError(f"automaton of process {p} never blocked (runaway loop)")

    def can_progress(state: _XState, p: int) -> bool:
        # guard evaluation on a throwaway clone; no effect escapes
        probe = state.automata[p].copy()
        return probe.on_poll(Ctx(_ProbeEngine(state, cfg, oracle), p))

    def actions(state: _XState) -> list[tuple]:
        acts: list[tuple] = []
        for p in cfg.processes:
            if p in state.crashed:
                continue
            if p not in state.halted:
                if p not in state.woken:
                    acts.append(("wake", p))
                elif can_progress(state, p):
                    acts.append(("poll", p))
                if state.crashes_left > 0 and (
                    crash_round_limit is None
                    or getattr(state.automata[p], "r", 0) <= crash_round_limit
                ):
                    acts.append(("crash", p))
        seen: set[tuple] = set()
        for receiver, sender, payload, round_tag in state.pending:
            cls = (receiver, sender if scenario.identified else None, payload, round_tag)
            if cls not in seen:
                seen.add(cls)
                acts.append(("deliver", receiver, sender, payload, round_tag))
        return acts

    def own(state: _XState, p: int) -> None:
        state.automata[p] = state.automata[p].copy()
        state.inboxes[p] = state.inboxes[p].clone()

    def apply(state: _XState, action: tuple) -> None:
        kind = action[0]
        if kind == "wake":
            p = action[1]
            state.woken.add(p)
            own(state, p)
            quiesce(state, p)
        elif kind == "poll":
            own(state, action[1])
            quiesce(state, action[1])
        elif kind == "crash":
            p = action[1]
            state.crashed.add(p)
            state.crashes_left -= 1
            state.pending = [m for m in state.pending if m[0] != p]
            state.monitor.on_crash(state, p)
        else:
            _, receiver, sender, payload, round_tag = action
            for i, m in enumerate(state.pending):
                if (
                    m[0] == receiver
                    and m[2] == payload
                    and m[3] == round_tag
                    and (not scenario.identified or m[1] == sender)
                ):
                    del state.pending[i]
                    break
            state.inboxes[receiver] = state.inboxes[receiver].clone()
            state.inboxes[receiver].deliver(sender, payload, round_tag)

    def is_terminal(state: _XState) -> bool:
        return all(
            p in state.crashed or p in state.halted for p in cfg.processes
        )

    def is_quiescent(state: _XState) -> bool:
        # a decided process may block forever in its final propose phase once
        # its peers halted; with nothing in flight that is a completed run
        return all(
            p in state.crashed
            or p in state.halted
            or getattr(state.automata[p], "decided", None) is not None
            for p in cfg.processes
        )

    init = _XState(
        automata={
            p: factory(scenario, p, random.Random(f"{scenario.seed}/proc/{p}"))
            for p in cfg.processes
        },
        inboxes={p: Inbox() for p in cfg.processes},
        pending=[],
        crashed=set(),
        halted=set(),
        woken=set(),
        crashes_left=budget,
        monitor=monitor,
    )
    init_key = init.key(scenario.identified)
    visited = {init_key}
    parents: dict[tuple, tuple | None] = {init_key: None}
    queue: deque[tuple[_XState, tuple]] = deque([(init, init_key)])

    def schedule_of(key: tuple) -> list[tuple]:
        chain: list[tuple] = []
        while parents[key] is not None:
            key, action = parents[key]
            chain.append(action)
        chain.reverse()
        return chain

    terminals = 0
    violations: list[Violation] = []
    violation_count = 0
    partial = False
    profiles: Counter = Counter()

    while queue:
        state, key = queue.popleft()
        broken = state.monitor.violation()
        if broken is not None:
            violation_count += 1
            if len(violations) < keep_witnesses:
                violations.append(Violation("invariant", broken, schedule_of(key)))
            continue
        if is_terminal(state):
            terminals += 1
            profiles[state.monitor.terminal_profile(state)] += 1
            for detail in state.monitor.terminal_checks(state):
                violation_count += 1
                if len(violations) < keep_witnesses:
                    violations.append(Violation("terminal", detail, schedule_of(key)))
            continue
        acts = actions(state)
        if not acts:
            if is_quiescent(state):
                terminals += 1
                profiles[state.monitor.terminal_profile(state)] += 1
                for detail in state.monitor.terminal_checks(state):
                    violation_count += 1
                    if len(violations) < keep_witnesses:
                        violations.append(Violation("terminal", detail, schedule_of(key)))
            else:
                violation_count += 1
                if len(violations) < keep_witnesses:
                    violations.append(
                        Violation(
                            "stuck",
                            "no enabled action but an undecided live process never halted",
                            schedule_of(key),
                        )
                    )
            continue
        for action in acts:
            child = state.clone()
            apply(child, action)
            child_key = child.key(scenario.identified)
            if child_key in visited:
                continue
            visited.add(child_key)
            parents[child_key] = (key, action)
            queue.append((child, child_key))
            if len(visited) >= max_states:
                partial = True
                queue.clear()
                break

    return ExploreResult(
        states=len(visited),
        terminals=terminals,
        violations=violations,
        violation_count=violation_count,
        partial=partial,
        terminal_profiles=profiles,
    )
