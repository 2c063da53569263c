"""Typed ``key = value`` run configuration with per-subcommand schemas."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SUBCOMMANDS = ("spectral", "shell", "boltzmann", "evolve", "wigner", "ladder", "coeffs", "compare")
KAPPA_MAX = 1.0 / 12
REQUIRED = object()


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(" ", "").split(",") if x)


def _strs(s: str) -> tuple:
    return tuple(x.strip() for x in s.split(",") if x.strip())


PARSERS = {"int": int, "float": float, "str": str, "bool": _bool, "floats": _floats, "strs": _strs}

_TABLES = {"n_phi": ("int", 10_000_000), "de": ("float", 0.01), "tables": ("str", "")}

SCHEMAS: dict[str, dict[str, tuple]] = {
    "spectral": {"n_phi": ("int", 10_000_000), "de": ("float", 0.01),
                 "timestamp": ("str", "pinned")},
    "shell": {**_TABLES, "a": ("float", 3.0), "n": ("int", 1_000_000), "width": ("float", 0.0),
              "test_energies": ("floats", (1.0, 2.5, 3.0, 4.5))},
    "boltzmann": {**_TABLES, "a": ("float", 3.0), "n": ("int", 100_000),
                  "free_times": ("float", 50.0), "lags": ("int", 200)},
    "evolve": {**_TABLES, "lam": ("float", REQUIRED), "t": ("float", 10.0), "dt": ("float", 0.05),
               "L": ("int", 16), "R": ("int", 8), "scheme": ("str", "strang"),
               "distribution": ("str", "rademacher"), "state": ("str", "band"),
               "band_lo": ("float", 2.8), "band_hi": ("float", 3.2), "ramp": ("float", 0.2),
               "width": ("float", 2.0), "enforce_margin": ("bool", True),
               "checkpoints": ("floats", ()), "observables": ("strs", ("norm2", "circular_variance")),
               "workers": ("int", 1)},
    "wigner": {"L": ("int", 8), "n_states": ("int", 100), "eps": ("float", 1.0),
               "x_bins": ("int", 8), "e_bins": ("int", 12)},
    "ladder": {**_TABLES, "lam": ("float", REQUIRED), "T": ("float", REQUIRED),
               "kappa": ("float", KAPPA_MAX), "delta": ("float", 1.0), "k_max": ("int", -1),
               "n_mc": ("int", 100_000), "band_lo": ("float", 2.5), "band_hi": ("float", 3.5),
               "ramp": ("float", 0.25), "probes": ("bool", True)},
    "coeffs": {"n_max": ("int", 6), "degree_k_max": ("int", 7)},
    "compare": {**_TABLES, "quantum_lams": ("floats", (0.5, 0.4, 0.3)), "tau_final": ("float", 4.0),
                "tau_points": ("int", 9), "exponent_lam": ("float", 0.4),
                "exponent_window": ("floats", (3.0, 8.0)), "L": ("int", 64), "R": ("int", 50),
                "dt": ("float", 0.05), "band": ("floats", (2.8, 3.2)), "ramp": ("float", 0.2),
                "width": ("float", 3.0), "n_boltzmann": ("int", 20_000), "energy_bin": ("float", 0.1),
                "ladder_lams": ("floats", (0.2, 0.1)), "T_ladder": ("float", 0.5),
                "kappa": ("float", KAPPA_MAX), "delta": ("float", 1.0), "n_mc": ("int", 200_000),
                "full_sum_terms": ("int", 8), "profile": ("floats", (2.5, 3.5, 0.25)),
                "distribution": ("str", "rademacher"), "run_quantum": ("bool", True),
                "run_ladder": ("bool", True), "workers": ("int", 1)},
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    seed: int = 0
    out: Path = field(default_factory=lambda: Path("."))

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, "seed": self.seed, "params": dict(self.params)}


def read_pairs(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Later keys override earlier ones."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _manifest_pairs(path: Path) -> tuple[str | None, dict, int | None]:
    data = json.loads(path.read_text())
    cfg = data.get("config", data)
    return cfg.get("subcommand"), dict(cfg.get("params", {})), cfg.get("seed")


def _coerce(key: str, kind: str, value):
    if not isinstance(value, str):
        # values from a manifest arrive already typed
        if kind in ("floats", "strs"):
            return tuple(value)
        if kind == "float" and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if kind == "int" and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind == "bool" and isinstance(value, bool):
            return value
        if kind == "str" and isinstance(value, str):
            return value
        raise ConfigError(f"{key}: expected {kind}, got {value!r}")
    try:
        return PARSERS[kind](value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind}, got {value!r}") from exc


def parse_config(subcommand: str, path=None, overrides=None, seed: int | None = None,
                 out=None) -> RunConfig:
    """Resolve defaults, then the config file (or a previous manifest), then ``overrides``."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    schema = SCHEMAS[subcommand]
    raw: dict = {}
    file_seed = None
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        if path.suffix == ".json":
            sub, raw, file_seed = _manifest_pairs(path)
            if sub is not None and sub != subcommand:
                raise ConfigError(f"manifest is for {sub!r}, not {subcommand!r}")
        else:
            raw = read_pairs(path.read_text())
    if "seed" in raw:
        file_seed = int(raw.pop("seed"))
    for item in overrides or []:
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        else:
            raw.update(item)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {subcommand}: {', '.join(unknown)}")
    params = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            params[key] = _coerce(key, kind, raw[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for {subcommand}")
        else:
            params[key] = default
    _validate(subcommand, params)
    final_seed = seed if seed is not None else (file_seed if file_seed is not None else 0)
    return RunConfig(subcommand, params, int(final_seed), Path(out) if out is not None else Path("."))


def _validate(sub: str, p: dict) -> None:
    probes = sub == "compare" and p.get("run_ladder") or sub == "ladder" and p.get("probes")
    if probes and not (0 < p["kappa"] <= KAPPA_MAX):
        raise ConfigError(f"kappa = {p['kappa']} violates the integral-probe precondition "
                          f"0 < kappa <= 1/12")
    for key in ("lam",):
        if key in p and not (0 < p[key] < 1):
            raise ConfigError(f"{key} must lie in (0, 1)")
    for key in ("L", "R", "n", "n_mc", "n_phi", "n_states", "n_boltzmann"):
        if key in p and p[key] < 1:
            raise ConfigError(f"{key} must be positive")
    if sub == "evolve":
        if p["scheme"] not in ("strang", "exact"):
            raise ConfigError("scheme must be 'strang' or 'exact'")
        if p["state"] not in ("band", "gaussian", "point"):
            raise ConfigError("state must be band, gaussian or point")
    if sub == "compare" and len(p["exponent_window"]) != 2:
        raise ConfigError("exponent_window needs two kinetic times")
