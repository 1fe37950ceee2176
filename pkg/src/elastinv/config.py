"""Flat ``key = value`` run configuration with strict key checking."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .forward import BoundaryCondition, Disk, PhantomSpec, Rectangle, two_inclusion_phantom
from .losses import LossWeights
from .training import ModelConfig, TrainingSchedule


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # dataset generation
    ny: int = 32
    nx: int = 32
    h: float = 1.0
    t: float = 1.0
    phantom: str = "two_inclusion"
    background_E: float = 1.0
    background_nu: float = 0.3
    inclusions: str = ""
    stretch: float = 0.01
    snr: float = 1000.0
    # networks
    depth: int = 16
    width: int = 128
    sine_scale: float = 30.0
    f_min: float = 1e-4
    omega: int = 64
    # training
    stage_a_iters: int = 50_000
    stage_b_iters: int = 100_000
    stage_c_iters: int = 50_000
    learning_rate: float = 1e-4
    desk_scale_factor: float = 1.0
    pretrain: bool = True
    lambda_u: float = 2.0
    lambda_eps: float = 1.0
    lambda_r: float = 3.0
    lambda_E: float = 0.02
    E_c: float = 0.25
    seed: int | None = None

    def model(self) -> ModelConfig:
        return ModelConfig(self.depth, self.width, self.sine_scale, self.f_min, self.omega)

    def schedule(self) -> TrainingSchedule:
        return TrainingSchedule(
            self.stage_a_iters,
            self.stage_b_iters,
            self.stage_c_iters,
            learning_rate=self.learning_rate,
            seed=self.require_seed(),
            desk_scale_factor=self.desk_scale_factor,
            pretrain=self.pretrain,
        )

    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_u, self.lambda_eps, self.lambda_r, self.lambda_E)

    def boundary(self) -> BoundaryCondition:
        return BoundaryCondition(self.stretch)

    def phantom_spec(self) -> PhantomSpec:
        if self.phantom == "two_inclusion":
            if self.inclusions:
                raise ConfigError("'inclusions' is only used with phantom = custom")
            return two_inclusion_phantom()
        if self.phantom == "homogeneous":
            return PhantomSpec(self.background_E, self.background_nu)
        if self.phantom == "custom":
            return PhantomSpec(self.background_E, self.background_nu, parse_inclusions(self.inclusions))
        raise ConfigError(f"unknown phantom {self.phantom!r} (two_inclusion, homogeneous, custom)")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is mandatory: set 'seed' in the config or pass --seed")
        return self.seed


def parse_inclusions(text: str) -> tuple:
    """``disk:cx,cy,r,E,nu; rect:x0,y0,x1,y1,E,nu`` in cell units."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        kind, _, args = part.partition(":")
        try:
            vals = [float(v) for v in args.split(",")]
        except ValueError:
            raise ConfigError(f"bad inclusion parameters in {part!r}") from None
        kind = kind.strip()
        if kind == "disk" and len(vals) == 5:
            out.append(Disk(*vals))
        elif kind == "rect" and len(vals) == 6:
            out.append(Rectangle(*vals))
        else:
            raise ConfigError(f"cannot parse inclusion {part!r}")
    return tuple(out)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _cast(name: str, text: str):
    kind = _FIELDS[name].type
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
        if kind == "int":
            return int(text)
        if kind == "int | None":
            return None if text.lower() in ("", "none") else int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"invalid value for {name}: {text!r}") from None


def parse_config(text: str, base: RunConfig = RunConfig()) -> RunConfig:
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in updates:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        updates[key] = _cast(key, value)
    return replace(base, **updates)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for k, v in asdict(cfg).items():
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif v is None:
            v = "none"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def defaults_help() -> str:
    return "config keys and defaults:\n" + "".join(f"  {line}\n" for line in dump_config(RunConfig()).splitlines())
