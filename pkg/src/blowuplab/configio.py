"""Plain-text configuration: one ``key = value`` per line.

Sections use dotted keys (``simulate.steps = 20000``); ``#`` starts a
comment; unknown keys are rejected with the offending line number.  Every
key has a documented default below, so an empty file is a valid
configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

# key -> (type tag, default).  "auto" admits the literal string "auto".
SCHEMA = {
    "p": ("float", 7.0),
    "seed": ("int", 0),
    "stamp": ("bool", False),
    "profile.kind": ("str", "shooting"),  # shooting | kappa
    "profile.scan_lo": ("float", 0.8),
    "profile.scan_hi": ("float", 3.0),
    "profile.scan_points": ("int", 24),
    "profile.r_start": ("float", 1e-4),
    "profile.r_shoot": ("float", 15.0),
    "profile.tol_bisect": ("float", 1e-14),
    "profile.classifier_threshold": ("float", 2.5),
    "profile.pick": ("int", 0),  # which converged profile to keep
    "spectrum.h": ("float", 0.0025),
    "spectrum.r_max": ("float", 15.0),
    "spectrum.count": ("int", 8),
    "spectrum.m_max": ("int", 4),
    "spectrum.nondegeneracy_tol": ("float", 1e-3),
    "corrector.n": ("int", 3),
    "corrector.h": ("float", 0.005),
    "corrector.delta": ("float", 0.2),
    "corrector.b_cap": ("float", 0.1),
    "simulate.s0": ("float", 50.0),
    "simulate.b0": ("float_or_auto", "auto"),
    "simulate.ds": ("float", 7.5e-3),
    "simulate.steps": ("int", 20000),
    "simulate.n_r": ("int", 400),
    "simulate.n_z": ("int", 600),
    "simulate.r_max": ("float", 15.0),
    "simulate.z_max": ("float", 40.0),
    "simulate.K": ("int", 4),
    "simulate.q": ("int", 3),
    "simulate.delta_q": ("float", 0.05),
    "simulate.mode_damping": ("bool", True),
    "simulate.perturb_eps": ("float", 0.0),
    "simulate.out_every": ("int", 1),
    "simulate.phys_check_every": ("int", 2500),
    "simulate.phys_steps": ("int", 50),
    "simulate.verdict_exit_patience": ("int", 100),
    "simulate.strict_exponents": ("bool", False),
    "simulate.lambda_floor": ("float", 1e-300),
    "reconstruct.window_fraction": ("float", 0.5),
}


@dataclass
class Config:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values.get(key, SCHEMA[key][1])

    def set(self, key: str, raw: str, line_no: int | None = None):
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line_no)
        kind = SCHEMA[key][0]
        try:
            if kind == "float":
                val = float(raw)
            elif kind == "int":
                val = int(raw)
            elif kind == "bool":
                low = raw.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(raw)
                val = low in ("true", "1", "yes")
            elif kind == "float_or_auto":
                val = "auto" if raw.lower() == "auto" else float(raw)
            else:
                val = raw
        except ValueError as exc:
            raise ConfigError(f"bad value {raw!r} for {key}", line_no) from exc
        self.values[key] = val


def parse_config(path: str | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"expected key = value, got {text!r}", line_no)
            key, _, raw = text.partition("=")
            cfg.set(key.strip(), raw.strip(), line_no)
    return cfg


def default_config_text() -> str:
    """Every key with its default, as a valid config file."""
    lines = ["# blowuplab configuration (defaults)"]
    for key, (kind, default) in SCHEMA.items():
        val = str(default).lower() if isinstance(default, bool) else default
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
