"""Run configuration: dimensions, thresholds, loss weights, seeds.

Every default records its provenance ("paper" for values stated in the source
method, "decision" for values this artifact had to choose). The config file is
a single JSON object; unknown keys are rejected to catch typos.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .losses import LossWeights


@dataclass
class RunConfig:
    # dimensions
    d_geo: int = 448
    d_app: int = 768
    d_fused: int = 256
    d_text: int = 768
    heads: int = 8
    num_freqs: int = 6
    knn_k: int = 16
    num_partlets: int = 32
    decoder_blocks: int = 3
    # thresholds and solver parameters
    tau: float = 0.07
    sinkhorn_epsilon: float = 0.05
    sinkhorn_max_iters: int = 200
    sinkhorn_tol: float = 1e-6
    null_cost: float = 1.5
    conf_low_threshold: float = 0.5
    auto_accept_maha: float = 0.8
    conf_alpha: float = 0.5
    conf_beta: float = 1.0
    stats_epsilon: float = 1e-4
    pair_sim_theta: float = 0.85
    # loss weights
    loss_weights: LossWeights = field(default_factory=LossWeights)
    # seeds and paths
    seed: int = 0
    lease_seconds: float = 600.0


PROVENANCE = {
    "d_geo": "paper", "d_app": "paper", "d_fused": "paper", "d_text": "paper",
    "heads": "paper", "num_freqs": "paper", "knn_k": "paper", "num_partlets": "paper",
    "decoder_blocks": "paper",
    "tau": "paper", "auto_accept_maha": "paper", "conf_low_threshold": "paper",
    "conf_alpha": "paper", "conf_beta": "paper", "loss_weights": "paper",
    "sinkhorn_epsilon": "decision", "sinkhorn_max_iters": "decision",
    "sinkhorn_tol": "decision", "null_cost": "decision", "stats_epsilon": "decision",
    "pair_sim_theta": "decision", "seed": "decision", "lease_seconds": "decision",
}


def load_config(path: str | Path) -> RunConfig:
    """Read a config JSON; unknown keys are errors."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "loss_weights" in doc:
        doc["loss_weights"] = LossWeights(**doc["loss_weights"])
    return RunConfig(**doc)


def save_config(path: str | Path, cfg: RunConfig) -> None:
    Path(path).write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True))
