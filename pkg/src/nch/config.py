"""Plain key=value configuration: parsing, validation, rendering.

One key per line, `#` starts a comment, unknown keys are rejected with their
line number.  Defaults are documented on SimulationConfig; parse/render round
trips exactly (floats are rendered with repr, which preserves doubles).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields

from .errors import ConfigError
from .grid import ModelParams

SCHEMES = ("etd1", "etdrk2", "p-etd1", "p-etdrk2")
MASS_TARGETS = ("predictor", "initial")

_INITIAL_RE = re.compile(r"^\s*(sine|random)\s*\(([^)]*)\)\s*$")


@dataclass(frozen=True)
class InitialSpec:
    """Initial field: sine(amplitude) or random(offset, amplitude, seed)."""

    kind: str
    amplitude: float
    offset: float = 0.0
    seed: int = 0

    def render(self) -> str:
        if self.kind == "sine":
            return f"sine({self.amplitude!r})"
        return f"random({self.offset!r}, {self.amplitude!r}, {self.seed})"

    @staticmethod
    def parse(text: str) -> "InitialSpec":
        m = _INITIAL_RE.match(text)
        if m is None:
            raise ValueError(
                f"expected sine(amplitude) or random(offset, amplitude, seed), got {text!r}"
            )
        kind = m.group(1)
        args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
        if kind == "sine":
            if len(args) != 1:
                raise ValueError(f"sine takes one argument (amplitude), got {len(args)}")
            return InitialSpec("sine", float(args[0]))
        if len(args) != 3:
            raise ValueError(
                f"random takes three arguments (offset, amplitude, seed), got {len(args)}"
            )
        return InitialSpec("random", float(args[1]), offset=float(args[0]), seed=int(args[2]))


@dataclass(frozen=True)
class SimulationConfig:
    """Fully validated run description; field defaults are the documented ones."""

    scheme: str = "p-etd1"
    epsilon: float = 0.02
    theta: float = 0.8
    theta_c: float = 1.6
    sigma: float = 30.0
    kappa: float = 2.0
    delta: float = 0.05
    L: float = 1.0
    M: int = 128
    tau: float = 1e-4
    T_final: float = 0.02
    initial: InitialSpec = InitialSpec("sine", 0.1)
    snapshot_times: tuple[float, ...] = ()
    output_dir: str = ""
    mass_target: str = "predictor"
    projection_tol: float = 1e-13
    projection_max_iter: int = 100
    structure_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.mass_target not in MASS_TARGETS:
            raise ValueError(
                f"mass_target must be one of {MASS_TARGETS}, got {self.mass_target!r}"
            )
        if not self.T_final >= 0:
            raise ValueError(f"T_final must be nonnegative, got {self.T_final}")
        if not self.projection_tol > 0:
            raise ValueError(f"projection_tol must be positive, got {self.projection_tol}")
        if self.projection_max_iter < 1:
            raise ValueError(
                f"projection_max_iter must be >= 1, got {self.projection_max_iter}"
            )
        for s in self.snapshot_times:
            if not 0 <= s <= self.T_final:
                raise ValueError(
                    f"snapshot time {s} outside [0, T_final={self.T_final}]"
                )
        self.model_params()  # surfaces parameter invariant violations

    def model_params(self) -> ModelParams:
        return ModelParams(
            epsilon=self.epsilon,
            theta=self.theta,
            theta_c=self.theta_c,
            sigma=self.sigma,
            kappa=self.kappa,
            delta=self.delta,
            L=self.L,
            M=self.M,
            tau=self.tau,
        )


_INT_KEYS = {"M", "projection_max_iter"}
_FLOAT_KEYS = {
    "epsilon",
    "theta",
    "theta_c",
    "sigma",
    "kappa",
    "delta",
    "L",
    "tau",
    "T_final",
    "projection_tol",
    "structure_threshold",
}
_STR_KEYS = {"scheme", "mass_target", "output_dir"}
_KNOWN_KEYS = (
    _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"initial", "snapshot_times"}
)


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "initial":
            return InitialSpec.parse(raw)
        if key == "snapshot_times":
            if not raw.strip():
                return ()
            return tuple(float(p) for p in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc


def parse_config(text: str, overrides: dict[str, str] | None = None) -> SimulationConfig:
    """Parse config text, apply raw-string overrides, validate everything."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)

    for key, raw in (overrides or {}).items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _convert(key, raw, 0)

    try:
        return SimulationConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def render_config(config: SimulationConfig) -> str:
    """Inverse of parse_config: parse(render(c)) == c."""
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "initial":
            rendered = value.render()
        elif f.name == "snapshot_times":
            rendered = ", ".join(repr(v) for v in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"
