"""Deliberately broken automata.

Each mutant removes exactly one safeguard from a protocol, and exists to
prove the corresponding checker is not vacuous: a campaign over a mutant
must produce at least one failing trace per documented pairing:

* ``flood_min``      adopts the minimum instead of the maximum   -> stubbornness
* ``eager_lock``     locks its value even on mixed proposals     -> lock-exclusivity
* ``lonely_lock``    satisfies every wait with a single message  -> decision-spread
* ``any_report``     treats any reported value as a majority     -> unique-decide
* ``free_running``   passes the alive wait on its own message    -> round-skew
* ``hasty_suspector``suspects without the f+2 stability window   -> strong accuracy
                                                                    (perfect-detector validity)

Never wire these into production scenarios.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .consensus import FloodMaxConsensus, LeaderVoteConsensus, LockMinConsensus
from .simulator import Ctx, ScenarioConfig
from .transforms import StableSuspector


@dataclass
class FloodMinConsensus(FloodMaxConsensus):
    def _merge(self, values: set[int]) -> int:
        return min(values)


@dataclass
class EagerLockConsensus(LockMinConsensus):
    def _lock_rule(self, proposed: set[int]) -> int | None:
        return self.v


@dataclass
class LonelyLockConsensus(LockMinConsensus):
    def _need(self, ctx: Ctx) -> int:
        return 1


@dataclass
class AnyReportLeaderVote(LeaderVoteConsensus):
    def _majority(self, counts: Counter) -> int | None:
        return min(counts) if counts else None


@dataclass
class FreeRunningSuspector(StableSuspector):
    def on_poll(self, ctx: Ctx) -> bool:
        if self.phase == "wait" and ctx.senders(self.r, "ALIVE"):
            # any single heartbeat satisfies the mutant's wait
            self.earlier_alive = frozenset(ctx.senders(self.r, "ALIVE")[:1])
            self.r += 1
            ctx.switch_round(self.r)
            self.phase = "send"
            return True
        return super().on_poll(ctx)


@dataclass
class HastySuspector(StableSuspector):
    def _stable_enough(self) -> bool:
        return True


def flood_min(scenario: ScenarioConfig, proc: int, rng) -> FloodMinConsensus:
    cfg = scenario.cfg
    return FloodMinConsensus(n=cfg.n, f=cfg.f, proc=proc, v=scenario.inputs[proc - 1])


def eager_lock(scenario: ScenarioConfig, proc: int, rng) -> EagerLockConsensus:
    cfg = scenario.cfg
    return EagerLockConsensus(n=cfg.n, f=cfg.f, proc=proc, v=scenario.inputs[proc - 1])


def lonely_lock(scenario: ScenarioConfig, proc: int, rng) -> LonelyLockConsensus:
    cfg = scenario.cfg
    return LonelyLockConsensus(n=cfg.n, f=cfg.f, proc=proc, v=scenario.inputs[proc - 1])


def any_report(scenario: ScenarioConfig, proc: int, rng) -> AnyReportLeaderVote:
    cfg = scenario.cfg
    return AnyReportLeaderVote(n=cfg.n, f=cfg.f, proc=proc, v=scenario.inputs[proc - 1])


def free_running(scenario: ScenarioConfig, proc: int, rng) -> FreeRunningSuspector:
    cfg = scenario.cfg
    return FreeRunningSuspector(n=cfg.n, f=cfg.f, proc=proc, rounds_cap=scenario.rounds)


def hasty_suspector(scenario: ScenarioConfig, proc: int, rng) -> HastySuspector:
    cfg = scenario.cfg
    return HastySuspector(n=cfg.n, f=cfg.f, proc=proc, rounds_cap=scenario.rounds)


MUTANTS = {
    "flood-min": ("floodmax", "stubbornness", flood_min),
    "eager-lock": ("lockmin", "lock-exclusivity", eager_lock),
    "lonely-lock": ("lockmin", "decision-spread", lonely_lock),
    "any-report": ("leadervote", "unique-decide", any_report),
    "free-running": ("stable-suspector", "round-skew", free_running),
    "hasty-suspector": ("stable-suspector", "strong-accuracy", hasty_suspector),
}
