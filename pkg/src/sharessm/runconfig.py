"""Run configuration: a flat, typed ``key = value`` text format.

The file is the single source of truth for a run: architecture, training
hyperparameters, scheme, dataset pointer, and output directory.  Parsing is
strict (unknown keys are rejected) and serialization is canonical, so a
config round-trips losslessly and artifact directories can echo it verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ParameterError


@dataclass
class RunConfig:
    # task / architecture
    task: str = "classification"
    scheme: str = "imex"
    n_blocks: int = 2
    hidden: int = 16
    state: int = 16
    kernel_size: int = 64
    dropout: float = 0.0
    ssm_only: bool = False
    scan_mode: str = "auto"
    # training
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    loss: str = ""            # empty: pick per task (cross_entropy / mse)
    split: tuple = (0.70, 0.15, 0.15)
    omega_max: float = 4.0
    # data / output
    dataset: str = ""         # path to a dataset manifest file
    out_dir: str = "runs/out"

    def resolved_loss(self) -> str:
        if self.loss:
            return self.loss
        return "cross_entropy" if self.task == "classification" else "mse"


_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, text: str):
    default = getattr(RunConfig(), name)
    if isinstance(default, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ParameterError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(float(c) for c in text.split(","))
    return text


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys fail."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELDS:
            raise ParameterError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, val)
    return RunConfig(**values)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = ",".join(repr(c) for c in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path: str, cfg: RunConfig):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))
