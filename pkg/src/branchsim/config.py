"""Flat ``key = value`` scenario files.

One setting per line, ``#`` starts a comment.  Every key has a type and a
default; unknown keys, duplicates and malformed values are rejected with the
offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

SCENARIOS = ("dephasing", "grid2body", "classical-limit", "branch-study", "check")
SWEEPABLE = {"K": "K", "g_scale": "g_scale", "dt": "dt", "n_branches": "n_branches"}


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key: (parser, default)
KEYS: dict[str, tuple] = {
    "scenario": (str, None),
    "seed": (int, 0),
    "T": (float, 1.0),
    "dt": (float, 1e-3),
    "method": (str, "auto"),
    "hbar": (float, 1.0),
    "sample_every": (int, 1),
    "output": (str, "out"),
    "max_joint_dim": (int, 4096),
    # dephasing
    "K": (int, 2),
    "couplings": (_floats, None),
    "g_scale": (float, 1.0),
    "system_field": (float, 0.0),
    "system_bias": (float, 0.0),
    "system_theta": (float, math.pi / 4),
    "bath_field": (float, 0.0),
    "bath_theta": (float, math.pi / 4),
    "drive_slope": (float, 0.0),
    "exact": (_bool, True),
    # grids
    "n": (int, 256),
    "n_a": (int, 32),
    "n_b": (int, 32),
    "length": (float, 40.0),
    "spacing": (float, 0.5),
    "mass": (float, 1.0),
    "mass_a": (float, 1.0),
    "mass_b": (float, 1.0),
    "q_product": (float, 1.0),
    "softening": (float, None),
    "boundary": (str, "dirichlet"),
    "scheme": (str, "spectral"),
    "potential": (str, "harmonic"),
    "omega": (float, 1.0),
    "force": (float, 0.5),
    "quartic": (float, 0.0625),
    "omega_a": (float, 0.5),
    "omega_b": (float, 0.5),
    "x0": (float, 3.0),
    "x0_a": (float, -3.0),
    "x0_b": (float, 3.0),
    "p0": (float, 0.0),
    "sigma": (float, 0.5),
    # branches
    "n_branches": (int, 64),
    "profiles": (int, 100),
    "window": (int, 5),
    "weight_mode": (str, "modSquared"),
    "basis": (str, "pointer"),
    "level_scale": (float, 0.01),
    "overlap_threshold": (float, 0.1),
    "filter": (str, ""),
}

CHOICES = {
    "scenario": SCENARIOS,
    "method": ("auto", "krylov", "split"),
    "boundary": ("dirichlet", "periodic"),
    "scheme": ("fd", "spectral"),
    "potential": ("harmonic", "free", "linear", "quartic"),
    "weight_mode": ("modSquared", "amplitude"),
    "basis": ("pointer", "energy"),
}


@dataclass
class ScenarioConfig:
    values: dict
    source: Path | None = None
    lines: dict = field(default_factory=dict)  # key -> line number in the source

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def base_dir(self) -> Path:
        return self.source.parent if self.source is not None else Path.cwd()

    def output_dir(self, override: str | Path | None = None) -> Path:
        out = Path(override) if override is not None else Path(self.values["output"])
        return out if out.is_absolute() else self.base_dir / out

    def with_value(self, key: str, raw: str) -> "ScenarioConfig":
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values = dict(self.values)
        values[key] = _parse_value(key, raw, self._where(key))
        cfg = ScenarioConfig(values, self.source, dict(self.lines))
        cfg.validate()
        return cfg

    def _where(self, key: str) -> str:
        src = self.source.name if self.source else "<config>"
        return f"{src}:{self.lines.get(key, 0)}"

    def fail(self, key: str, message: str):
        raise ConfigError(f"{self._where(key)}: {message}")

    def validate(self) -> None:
        v = self.values
        if v["scenario"] is None:
            self.fail("scenario", "missing required key 'scenario'")
        for key, choices in CHOICES.items():
            if v[key] not in choices:
                self.fail(key, f"{key} must be one of {', '.join(choices)}")
        for key, val in v.items():
            if isinstance(val, float) and not math.isfinite(val):
                self.fail(key, f"{key} must be finite")
            if isinstance(val, tuple) and not all(math.isfinite(x) for x in val):
                self.fail(key, f"{key} must be finite")
        if not v["dt"] > 0:
            self.fail("dt", "dt must be positive")
        if v["scenario"] != "check":
            if not v["dt"] < v["T"]:
                self.fail("dt", "dt must be smaller than T")
            steps = v["T"] / v["dt"]
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                self.fail("T", "T must be an integer multiple of dt")
            if round(steps) % v["sample_every"]:
                self.fail("sample_every", "sample_every must divide the number of steps")
        for key in ("hbar", "mass", "mass_a", "mass_b", "spacing", "length", "sigma", "omega"):
            if not v[key] > 0:
                self.fail(key, f"{key} must be positive")
        for key in ("K", "n", "n_a", "n_b", "n_branches", "profiles", "sample_every", "max_joint_dim"):
            if v[key] < 1:
                self.fail(key, f"{key} must be at least 1")
        if v["couplings"] is not None and len(v["couplings"]) != v["K"]:
            self.fail("couplings", f"{len(v['couplings'])} couplings given for K={v['K']}")
        if v["window"] < 3 or v["window"] % 2 == 0:
            self.fail("window", "window must be odd and at least 3")
        if v["softening"] is not None and not v["softening"] > 0:
            self.fail("softening", "softening must be positive")

    def echo(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                continue
            if isinstance(val, tuple):
                text = ",".join(repr(x) for x in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = repr(val) if isinstance(val, float) else str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, raw: str, where: str):
    parser = KEYS[key][0]
    try:
        if parser is int:
            f = float(raw)
            if f != int(f):
                raise ValueError(f"not an integer: {raw!r}")
            return int(f)
        return parser(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None


def parse_config(text: str, source: Path | str | None = None, validate: bool = True) -> ScenarioConfig:
    values = {k: d for k, (_, d) in KEYS.items()}
    lines = {}
    name = Path(source).name if source else "<config>"
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{name}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{name}:{lineno}: unknown key {key!r}")
        if key in lines:
            raise ConfigError(f"{name}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        if not raw:
            raise ConfigError(f"{name}:{lineno}: empty value for {key!r}")
        values[key] = _parse_value(key, raw, f"{name}:{lineno}")
        lines[key] = lineno
    cfg = ScenarioConfig(values, source, lines)
    if validate:
        cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, path)
