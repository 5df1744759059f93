"""Shared scenario builders for the test suite."""

from anonsim import FailurePattern, OracleProfile, ScenarioConfig, SystemConfig
from anonsim.cli import ALGORITHMS


def scenario(
    algorithm: str,
    n: int,
    f: int,
    inputs=None,
    crashes=None,
    kind=None,
    behavior="optimistic",
    convergence=0,
    policy="fifo",
    seed=0,
    horizon=None,
    rounds=None,
) -> ScenarioConfig:
    info = ALGORITHMS[algorithm]
    if inputs is None:
        inputs = (0,) * n if info.consensus else ()
    sc = ScenarioConfig(
        cfg=SystemConfig(n, f),
        algorithm=algorithm,
        inputs=tuple(inputs),
        pattern=FailurePattern.of(n, crashes or {}),
        oracle_kind=kind or info.oracle_kinds[0],
        profile=OracleProfile(behavior, convergence),
        policy=policy,
        seed=seed,
        horizon=horizon,
        rounds=rounds,
        identified=info.identified,
    )
    sc.validate()
    return sc


def factory_of(algorithm: str):
    return ALGORITHMS[algorithm].factory
