"""Run configuration: flat ``key = value`` text with one section per module.

Unset keys fall back to documented defaults; a handful (marked ``auto``)
resolve per environment kind, following the hyperparameter tables the
experiments were tuned with:

===================  =============  =============
key                  hypergrid      bitseq
===================  =============  =============
training.epsilon     0              1e-3
training.weight_decay 0             1e-5
backward.lr_decay    0.999          0.9999
backward.ema_tau     0.25           0.1
replay.alpha         0.5            0.9
replay.beta          0.0            0.1
objective.leaf_coef  5.0            5.0
===================  =============  =============
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .envs import BitSeqSpec, DagEnv, HypergridSpec, build_bitseq, build_hypergrid, build_micro, parse_edge_list
from .params import OBJECTIVES

AUTO = "auto"


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    kind: str = "hypergrid"
    # hypergrid
    dims: int = 2
    side: int = 8
    r0: float = 1e-3
    r1: float = 0.5
    r2: float = 2.0
    # bitseq
    length: int = 12
    block: int = 3
    num_modes: int = 8
    mode_distance: int = 3
    h_set: str = "000,111,110,011"
    # micro
    name: str = "diamond"
    chain_length: int = 3
    edges_file: str = ""
    seed: int = 0          # environment construction seed (mode set draws)


@dataclass
class ObjectiveConfig:
    kind: str = "subtb"
    subtb_lambda: float = 0.9
    mdqn_alpha: float = 0.15
    mdqn_l0: float = -100.0
    leaf_coef: float | str = AUTO


@dataclass
class BackwardConfig:
    kind: str = "uniform"
    lr: float | str = AUTO          # TLM/pessimistic backward lr; default = forward lr
    lr_decay: float | str = AUTO
    ema_tau: float | str = AUTO
    tlm_exclude_exploration: bool = False
    pessim_window: int = 20
    pessim_sample: int = 16
    pessim_steps: int = 1


@dataclass
class TrainingConfig:
    iterations: int = 20000
    batch_size: int = 16
    lr: float = 1e-3
    lr_decay: float = 1.0
    logz_lr: float = 0.1
    logz_lr_decay: float = 1.0
    epsilon: float | str = AUTO
    anneal_epsilon: bool = False
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float | str = AUTO


@dataclass
class ReplayConfig:
    enabled: bool | str = AUTO      # default: on for DQN objectives only
    capacity: int = 100000
    alpha: float | str = AUTO
    beta: float | str = AUTO
    sample_size: int = 256


@dataclass
class MetricsConfig:
    eval_every: int = 100
    window_capacity: int = 200000
    mc_rollouts: int = 10
    pinsker: bool = False
    log_wall_time: bool = False


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    backward: BackwardConfig = field(default_factory=BackwardConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def sections(self) -> dict[str, object]:
        return {"env": self.env, "objective": self.objective, "backward": self.backward,
                "training": self.training, "replay": self.replay, "metrics": self.metrics}


_AUTO_TABLE = {
    # (section, key): {env_kind: value, "default": value}
    ("training", "epsilon"): {"hypergrid": 0.0, "bitseq": 1e-3, "default": 0.0},
    ("training", "weight_decay"): {"hypergrid": 0.0, "bitseq": 1e-5, "default": 0.0},
    ("backward", "ema_tau"): {"hypergrid": 0.25, "bitseq": 0.1, "default": 0.25},
    ("replay", "alpha"): {"hypergrid": 0.5, "bitseq": 0.9, "default": 0.5},
    ("replay", "beta"): {"hypergrid": 0.0, "bitseq": 0.1, "default": 0.0},
    ("objective", "leaf_coef"): {"default": 5.0},
}

_TLM_LR_DECAY = {"hypergrid": 0.999, "bitseq": 0.9999, "default": 0.999}


def _coerce(raw: str, target_type, key: str):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean for {key!r}: {raw!r}")
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {target_type.__name__} for {key!r}: {raw!r}") from None
    return raw


def _field_types(section_obj) -> dict[str, type]:
    out = {}
    for f in fields(section_obj):
        t = f.type
        if isinstance(t, str):
            t = t.split("|")[0].strip()
            t = {"int": int, "float": float, "bool": bool, "str": str}.get(t, str)
        out[f.name] = t
    return out


def load_config(path: str | None = None, text: str | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Parse a config file plus ``section.key=value`` override strings."""
    cfg = RunConfig()
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    elif text is not None:
        parser.read_string(text)
    secs = cfg.sections()
    for sec_name in parser.sections():
        if sec_name not in secs:
            raise ConfigError(f"unknown config section [{sec_name}]")
        obj = secs[sec_name]
        types = _field_types(obj)
        for key, raw in parser.items(sec_name):
            if key not in types:
                raise ConfigError(f"unknown config key {sec_name}.{key}")
            if raw.strip().lower() == AUTO:
                setattr(obj, key, AUTO)
            else:
                setattr(obj, key, _coerce(raw, types[key], f"{sec_name}.{key}"))
    for ov in overrides or []:
        if "=" not in ov:
            raise ConfigError(f"override must look like section.key=value: {ov!r}")
        dotted, raw = ov.split("=", 1)
        dotted = dotted.strip()
        if "." not in dotted:
            raise ConfigError(f"override key must be section.key: {dotted!r}")
        sec_name, key = dotted.split(".", 1)
        if sec_name not in secs:
            raise ConfigError(f"unknown config section {sec_name!r}")
        obj = secs[sec_name]
        types = _field_types(obj)
        if key not in types:
            raise ConfigError(f"unknown config key {sec_name}.{key}")
        if raw.strip().lower() == AUTO:
            setattr(obj, key, AUTO)
        else:
            setattr(obj, key, _coerce(raw, types[key], dotted))
    resolve_auto(cfg)
    validate(cfg)
    return cfg


def resolve_auto(cfg: RunConfig) -> None:
    kind = cfg.env.kind
    secs = cfg.sections()
    for (sec_name, key), table in _AUTO_TABLE.items():
        obj = secs[sec_name]
        if getattr(obj, key) == AUTO:
            setattr(obj, key, table.get(kind, table["default"]))
    if cfg.backward.lr == AUTO:
        cfg.backward.lr = cfg.training.lr
    if cfg.backward.lr_decay == AUTO:
        # only TLM decays its backward schedule by default; the rest follow PF
        if cfg.backward.kind == "tlm":
            cfg.backward.lr_decay = _TLM_LR_DECAY.get(kind, _TLM_LR_DECAY["default"])
        else:
            cfg.backward.lr_decay = cfg.training.lr_decay
    if cfg.replay.enabled == AUTO:
        cfg.replay.enabled = cfg.objective.kind in ("softdqn", "mdqn")


def validate(cfg: RunConfig) -> None:
    if cfg.env.kind not in ("hypergrid", "bitseq", "micro"):
        raise ConfigError(f"env.kind must be hypergrid|bitseq|micro, got {cfg.env.kind!r}")
    if cfg.objective.kind not in OBJECTIVES:
        raise ConfigError(f"objective.kind must be one of {OBJECTIVES}, got {cfg.objective.kind!r}")
    from .backward import BACKWARD_KINDS
    if cfg.backward.kind not in BACKWARD_KINDS:
        raise ConfigError(f"backward.kind must be one of {BACKWARD_KINDS}, got {cfg.backward.kind!r}")
    if cfg.objective.kind == "subtb" and cfg.objective.subtb_lambda <= 0:
        raise ConfigError("objective.subtb_lambda must be positive")
    if cfg.training.iterations < 0 or cfg.training.batch_size <= 0:
        raise ConfigError("training.iterations must be >= 0 and batch_size > 0")
    eps = cfg.training.epsilon
    if not 0.0 <= eps <= 1.0:
        raise ConfigError("training.epsilon must lie in [0, 1]")
    if cfg.training.lr <= 0 or cfg.backward.lr <= 0 or cfg.training.logz_lr <= 0:
        raise ConfigError("learning rates must be positive")
    for name, val in (("training.lr_decay", cfg.training.lr_decay),
                      ("training.logz_lr_decay", cfg.training.logz_lr_decay),
                      ("backward.lr_decay", cfg.backward.lr_decay)):
        if not 0.0 < val <= 1.0:
            raise ConfigError(f"{name} must lie in (0, 1]")
    if not 0.0 < cfg.backward.ema_tau <= 1.0:
        raise ConfigError("backward.ema_tau must lie in (0, 1]")
    if cfg.backward.pessim_window <= 0 or cfg.backward.pessim_sample <= 0 \
            or cfg.backward.pessim_steps <= 0:
        raise ConfigError("pessimistic buffer settings must be positive")
    if cfg.replay.capacity <= 0 or cfg.replay.sample_size <= 0:
        raise ConfigError("replay.capacity and replay.sample_size must be positive")
    if cfg.metrics.eval_every <= 0 or cfg.metrics.window_capacity <= 0 \
            or cfg.metrics.mc_rollouts <= 0:
        raise ConfigError("metrics settings must be positive")
    if cfg.env.kind == "micro" and cfg.env.name not in ("diamond", "chain", "custom"):
        raise ConfigError(f"env.name must be diamond|chain|custom, got {cfg.env.name!r}")


def build_env(cfg: EnvConfig) -> DagEnv:
    if cfg.kind == "hypergrid":
        spec = HypergridSpec(dims=cfg.dims, side=cfg.side, r0=cfg.r0, r1=cfg.r1, r2=cfg.r2)
        return build_hypergrid(spec)
    if cfg.kind == "bitseq":
        h_set = tuple(w.strip() for w in cfg.h_set.split(",") if w.strip())
        spec = BitSeqSpec(length=cfg.length, block=cfg.block, num_modes=cfg.num_modes,
                          mode_distance=cfg.mode_distance, h_set=h_set)
        env, _ = build_bitseq(spec, rng_seed=cfg.seed)
        return env
    if cfg.kind == "micro":
        if cfg.name == "custom":
            with open(cfg.edges_file) as fh:
                edges = parse_edge_list(fh.read())
            return build_micro("custom", edges=edges)
        return build_micro(cfg.name, chain_length=cfg.chain_length)
    raise ConfigError(f"unknown env kind {cfg.kind!r}")


def dump_config(cfg: RunConfig) -> str:
    """Serialize with every value resolved; reloading reproduces the run."""
    parser = configparser.ConfigParser(interpolation=None)
    for sec_name, obj in cfg.sections().items():
        parser[sec_name] = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.17g}"
            parser[sec_name][f.name] = str(v)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
