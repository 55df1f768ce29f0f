"""Declarative experiment configuration with fail-fast validation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from ..combinatorics import CodeParameterError, build_mds_code

__all__ = ["EXPERIMENT_KINDS", "ExperimentConfig", "validate_config", "config_hash"]

CONFIG_VERSION = 1

EXPERIMENT_KINDS = (
    "pdpf",
    "moments",
    "sep",
    "roundtrip",
    "umse",
    "iep",
    "power-robustness",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario description for one experiment run.

    Fields not used by a kind are ignored by its runner but still validated
    for internal consistency.  `n_block` (subcarriers per block) is derived
    as n_total // n_blocks and must divide evenly.
    """

    kind: str
    seed: int = 0
    trials: int = 1000
    threads: int = 1

    # codebook
    q: int = 7
    k: int = 2
    phase_grid: int | None = None  # defaults to the per-user half size

    # system
    n_total: int = 168
    n_blocks: int = 28
    n_rx: int = 10
    n_taps: int = 6
    cp_len: int = 8
    snr_db: float = 5.0
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)

    # detection
    nnt: int = 60
    p_bound: float = 1e-4
    gamma: float | None = None  # None -> calibrate from (p_bound, nnt)
    mc_draws: int = 200_000

    # geometry
    aoa_deg: tuple[float, float, float] = (20.0, -30.0, 55.0)
    spread_deg: float = 10.0
    spacing: float = 0.5

    # attack
    attack: str = "silence"  # silence | imitate | jam | hybrid
    imitate_codeword: int | None = None
    target_half: str | None = None
    hybrid_probs: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    eva_power_db: float = 0.0
    eva_power_grid_db: tuple[float, ...] = (0.0, 30.0)
    n_rx_grid: tuple[int, ...] = (8, 100)

    # sep formula operating point
    sep_n_b: float = 100.0
    sep_n_total: float = 500.0
    sep_n_rx: float = 100.0

    # iep
    n_geometries: int = 200
    majority_trials: int = 21

    @property
    def n_block(self) -> int:
        return self.n_total // self.n_blocks

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("snr_grid_db", "aoa_deg", "hybrid_probs", "eva_power_grid_db", "n_rx_grid"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["version"] = CONFIG_VERSION
        return d


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Every violated precondition across all modules; empty list means ok."""
    errors: list[str] = []
    if cfg.kind not in EXPERIMENT_KINDS:
        errors.append(f"unknown experiment kind {cfg.kind!r}")
    if cfg.trials < 1:
        errors.append("trials must be positive")
    if cfg.threads < 1:
        errors.append("threads must be positive")
    if not 0 <= cfg.seed < 2**64:
        errors.append("seed must fit in 64 bits")
    try:
        build_mds_code(cfg.q, cfg.k)
    except CodeParameterError as e:
        errors.append(f"codebook parameters: {e}")
    if cfg.n_total % cfg.n_blocks != 0:
        hint = cfg.n_total / cfg.n_blocks
        errors.append(
            f"N_Total = {cfg.n_total} not divisible by B = {cfg.n_blocks} "
            f"(block size would be {hint:.4g}; choose N_Total = "
            f"{cfg.n_blocks * max(1, round(hint))})"
        )
    else:
        n_block = cfg.n_total // cfg.n_blocks
        if cfg.n_taps > n_block:
            errors.append(f"L = {cfg.n_taps} exceeds block size N = {n_block}")
    if cfg.cp_len < cfg.n_taps - 1:
        errors.append(f"cyclic prefix {cfg.cp_len} < L-1 = {cfg.n_taps - 1}")
    if not 0 < cfg.p_bound < 1:
        errors.append("p_bound must lie in (0, 1)")
    if cfg.gamma is not None and cfg.gamma <= 1:
        errors.append("gamma must exceed 1")
    if cfg.nnt < 4:
        errors.append("nnt must be at least 4")
    if cfg.spread_deg < 0:
        errors.append("angular spread must be non-negative")
    if cfg.attack not in ("silence", "imitate", "jam", "hybrid"):
        errors.append(f"unknown attack {cfg.attack!r}")
    if cfg.attack == "hybrid" and not math.isclose(sum(cfg.hybrid_probs), 1.0):
        errors.append("hybrid probabilities must sum to 1")
    if cfg.target_half not in (None, "B", "C"):
        errors.append("target_half must be null, 'B' or 'C'")
    if cfg.phase_grid is not None and cfg.phase_grid < 1:
        errors.append("phase_grid must be positive")
    if cfg.kind == "roundtrip":
        width = cfg.q * (3 * cfg.k - 2)
        if cfg.n_blocks != width:
            errors.append(
                f"roundtrip needs B = codeword length {width}, got {cfg.n_blocks}"
            )
    if cfg.kind == "sep":
        q_implied = cfg.sep_n_total * cfg.sep_n_rx / (7.0 * cfg.sep_n_b)
        if q_implied < 3:
            errors.append(
                f"sep operating point implies alphabet {q_implied:.3g} < 3"
            )
    return errors


_RUNTIME_FIELDS = {"threads"}


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the scientific configuration (runtime fields excluded)."""
    d = {k: v for k, v in cfg.to_dict().items() if k not in _RUNTIME_FIELDS}
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
