"""Flat key = value experiment configuration.

One experiment per file: ``key = value`` lines, ``#`` comments, no nesting.
Unknown keys are rejected so typos fail loudly; every validation error
names the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MODES = ("exact_coupling", "exact_indep", "ml", "cd", "oracle")
SIM_MODES = ("exact_coupling", "exact_indep", "ml", "cd")
KERNEL_NAMES = ("additive", "soot")
CD_COUPLINGS = ("shared_randomness", "independent")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    kernel: str
    lam: float
    t_end: float
    n_particles: int = 0
    n_runs: int = 1
    delta_lambda: float | None = None
    cd_coupling: str = "shared_randomness"
    output_times: tuple = ()
    resample_max: int | None = None
    resample_target: int | None = None
    oracle_x_max: int = 300
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"
    oracle_csv: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def resolved(self):
        """All effective settings as a plain dict, for the manifest."""
        out = {
            "mode": self.mode, "kernel": self.kernel, "lambda": self.lam,
            "t_end": self.t_end, "output_times": ",".join(
                f"{t:g}" for t in self.output_times),
            "seed": self.seed, "threads": self.threads,
            "output_dir": self.output_dir,
        }
        if self.mode in SIM_MODES:
            out["n_particles"] = self.n_particles
            out["n_runs"] = self.n_runs
        if self.mode == "cd":
            out["delta_lambda"] = self.delta_lambda
            out["cd_coupling"] = self.cd_coupling
        if self.mode in ("exact_coupling", "exact_indep"):
            out["resample_max"] = (self.resample_max if self.resample_max
                                   is not None else 2 * self.n_particles)
            out["resample_target"] = (self.resample_target if self.resample_target
                                      is not None else self.n_particles)
        if self.mode == "oracle":
            out["oracle_x_max"] = self.oracle_x_max
        if self.oracle_csv:
            out["oracle_csv"] = self.oracle_csv
        return out


def _parse_scalar(key, text, kind):
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a {kind.__name__}, got {text!r}") from None
    return text


def default_output_times(t_end):
    """Observation grid 0.125 * j for j = 1 .. floor(8 * t_end)."""
    return tuple(0.125 * j for j in range(1, int(8 * t_end + 1e-9) + 1))


_KEYS = ("mode", "kernel", "lambda", "delta_lambda", "cd_coupling",
         "n_particles", "n_runs", "t_end", "output_times", "resample_max",
         "resample_target", "oracle_x_max", "seed", "threads", "output_dir",
         "oracle_csv")


def parse_config(text):
    """Parse and validate a config file's contents."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}")
        raw[key] = value
    return build_config(raw)


def build_config(raw):
    """Validate a raw key -> string mapping into an ExperimentConfig."""
    for key in raw:
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")

    def need(key):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
        return raw[key]

    mode = need("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    kernel = need("kernel")
    if kernel not in KERNEL_NAMES:
        raise ConfigError(f"kernel must be one of {KERNEL_NAMES}, got {kernel!r}")
    lam = _parse_scalar("lambda", need("lambda"), float)
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    t_end = _parse_scalar("t_end", need("t_end"), float)
    if t_end < 0:
        raise ConfigError("t_end must be non-negative")

    cfg = ExperimentConfig(mode=mode, kernel=kernel, lam=lam, t_end=t_end, raw=dict(raw))

    if "output_times" in raw:
        try:
            times = tuple(float(tok) for tok in raw["output_times"].split(",") if tok.strip())
        except ValueError:
            raise ConfigError("output_times must be a comma-separated list of reals") from None
        if list(times) != sorted(times):
            raise ConfigError("output_times must be sorted ascending")
        if any(t < 0 or t > t_end for t in times):
            raise ConfigError("output_times must lie in [0, t_end]")
        cfg.output_times = times
    else:
        cfg.output_times = default_output_times(t_end)

    if mode in SIM_MODES:
        cfg.n_particles = _parse_scalar("n_particles", need("n_particles"), int)
        if cfg.n_particles < 1:
            raise ConfigError("n_particles must be positive")
        if "n_runs" in raw:
            cfg.n_runs = _parse_scalar("n_runs", raw["n_runs"], int)
            if cfg.n_runs < 1:
                raise ConfigError("n_runs must be positive")

    if mode == "cd":
        cfg.delta_lambda = _parse_scalar("delta_lambda", need("delta_lambda"), float)
        if cfg.delta_lambda <= 0:
            raise ConfigError("delta_lambda must be positive")
        if lam - cfg.delta_lambda / 2 <= 0:
            raise ConfigError("delta_lambda too large: lambda - delta_lambda/2 <= 0")
        if "cd_coupling" in raw:
            if raw["cd_coupling"] not in CD_COUPLINGS:
                raise ConfigError(f"cd_coupling must be one of {CD_COUPLINGS}")
            cfg.cd_coupling = raw["cd_coupling"]
    elif "delta_lambda" in raw or "cd_coupling" in raw:
        raise ConfigError("delta_lambda/cd_coupling only apply to mode = cd")

    if "resample_max" in raw:
        cfg.resample_max = _parse_scalar("resample_max", raw["resample_max"], int)
    if "resample_target" in raw:
        cfg.resample_target = _parse_scalar("resample_target", raw["resample_target"], int)
    m = cfg.resample_target
    big_m = cfg.resample_max
    if m is not None or big_m is not None:
        if big_m is None:
            big_m = 2 * cfg.n_particles
        if m is None:
            m = cfg.n_particles
        if not 0 < m <= big_m:
            raise ConfigError("resample_target must satisfy 0 < m <= M")

    if "oracle_x_max" in raw:
        cfg.oracle_x_max = _parse_scalar("oracle_x_max", raw["oracle_x_max"], int)
        if cfg.oracle_x_max < 2:
            raise ConfigError("oracle_x_max must be at least 2")
    if "seed" in raw:
        cfg.seed = _parse_scalar("seed", raw["seed"], int)
        if cfg.seed < 0:
            raise ConfigError("seed must be non-negative")
    if "threads" in raw:
        cfg.threads = _parse_scalar("threads", raw["threads"], int)
        if cfg.threads < 1:
            raise ConfigError("threads must be positive")
    if "output_dir" in raw:
        cfg.output_dir = raw["output_dir"]
    if "oracle_csv" in raw:
        cfg.oracle_csv = raw["oracle_csv"]
    return cfg
