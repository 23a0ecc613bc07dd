"""Experiment configuration: INI-style file, flag overrides, fingerprinting.

Sections [cell], [sandbox], [dqn] and [experiment] map onto the respective
dataclasses; unknown keys are rejected so typos fail loudly. The fingerprint
hashes every result-affecting field plus the kernel backend and package
version, so any output can be traced back to the exact setup that produced
it (output paths and job counts are excluded: they do not change results).
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, fields

import nrsched
from nrsched import backend
from nrsched.dqn import DqnHyperparams
from nrsched.sandbox import SandboxConfig
from nrsched.simnr import CellConfig

DEFAULT_SCHEDULERS = ["leasch", "pf", "rr"]
DEFAULT_N_SEEDS = 100


@dataclass
class ExperimentConfig:
    cell: CellConfig = field(default_factory=CellConfig)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    dqn: DqnHyperparams = field(default_factory=DqnHyperparams)
    schedulers: list[str] = field(default_factory=lambda: list(DEFAULT_SCHEDULERS))
    seeds: list[int] = field(default_factory=lambda: list(range(DEFAULT_N_SEEDS)))
    episodes: int = 500
    checkpoint: str | None = None
    out_dir: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seed list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seed list must be duplicate-free")
        if self.episodes < 0 or self.jobs < 1:
            raise ValueError("episodes must be >= 0 and jobs >= 1")

    def fingerprint(self) -> str:
        doc = {
            "version": nrsched.__version__,
            "backend": backend.backend_name(),
            "cell": _dataclass_dict(self.cell),
            "sandbox": _dataclass_dict(self.sandbox),
            "dqn": self.dqn.to_dict(),
            "schedulers": self.schedulers,
            "seeds": self.seeds,
            "episodes": self.episodes,
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _dataclass_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


_SECTION_TYPES = {
    "cell": CellConfig,
    "sandbox": SandboxConfig,
    "dqn": DqnHyperparams,
}

_EXPERIMENT_KEYS = ("schedulers", "seeds", "episodes", "checkpoint", "out_dir", "jobs")


def _coerce(raw: str, like):
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if like is None or isinstance(like, int) and not isinstance(like, bool):
        if raw.lower() == "none":
            return None
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def parse_seed_spec(spec: str) -> list[int]:
    """'N' means seeds 0..N-1; 'a,b,c' is an explicit list (use '5,' for just seed 5)."""
    spec = spec.strip()
    if "," in spec:
        return [int(tok) for tok in spec.split(",") if tok.strip()]
    n = int(spec)
    if n < 1:
        raise ValueError(f"seed count must be positive, got {n}")
    return list(range(n))


def load_config(path: str | None) -> ExperimentConfig:
    """Config file -> ExperimentConfig; missing path gives pure defaults."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ValueError(f"cannot read config file: {path}")
    for section in parser.sections():
        if section in _SECTION_TYPES:
            target = getattr(cfg, section)
            valid = {f.name: f for f in fields(target)}
            for key, raw in parser.items(section):
                if key not in valid:
                    raise ValueError(f"[{section}] has no option {key!r}")
                setattr(target, key, _coerce(raw, getattr(target, key)))
            target.__post_init__()
        elif section == "experiment":
            for key, raw in parser.items(section):
                if key not in _EXPERIMENT_KEYS:
                    raise ValueError(f"[experiment] has no option {key!r}")
                if key == "schedulers":
                    cfg.schedulers = [tok.strip() for tok in raw.split(",") if tok.strip()]
                elif key == "seeds":
                    cfg.seeds = parse_seed_spec(raw)
                elif key == "episodes":
                    cfg.episodes = int(raw)
                elif key == "jobs":
                    cfg.jobs = int(raw)
                elif key == "checkpoint":
                    cfg.checkpoint = raw or None
                elif key == "out_dir":
                    cfg.out_dir = raw
        else:
            raise ValueError(f"unknown config section [{section}]")
    cfg.__post_init__()
    return cfg


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    """Flags win over config-file values."""
    if getattr(args, "scheduler", None):
        cfg.schedulers = [tok.strip() for tok in args.scheduler.split(",") if tok.strip()]
    if getattr(args, "frames", None) is not None:
        cfg.cell.frames = args.frames
        cfg.cell.__post_init__()
    if getattr(args, "seeds", None):
        cfg.seeds = parse_seed_spec(args.seeds)
    if getattr(args, "episodes", None) is not None:
        cfg.episodes = args.episodes
    if getattr(args, "checkpoint", None):
        cfg.checkpoint = args.checkpoint
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    cfg.__post_init__()
    return cfg
