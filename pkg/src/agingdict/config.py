"""Flat ``key = value`` run configuration shared by every subcommand."""

from dataclasses import dataclass, fields, replace
from pathlib import Path

from agingdict.dictionary_learning import HyperParams


class ConfigError(ValueError):
    pass


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (attribute, parser)
KEYS = {
    "lambda": ("lam", float),
    "gamma": ("gamma", float),
    "k": ("k", int),
    "m": ("m", int),
    "max_outer_iter": ("max_outer_iter", int),
    "rel_tol": ("rel_tol", float),
    "seed": ("seed", int),
    "center": ("center", _bool),
    "manifest": ("manifest", str),
    "model": ("model", str),
    "out": ("out", str),
    "passes": ("passes", int),
    "sign": ("sign", str),
    "group": ("group", int),
    "f": ("f", int),
    "G": ("G", int),
    "n": ("n", int),
    "sparsity": ("sparsity", int),
    "noise": ("noise", float),
    "format": ("format", str),
}

CHECKS = {
    "lam": (lambda v: v >= 0, ">= 0"),
    "gamma": (lambda v: v >= 0, ">= 0"),
    "k": (lambda v: v >= 1, ">= 1"),
    "m": (lambda v: v >= 1, ">= 1"),
    "max_outer_iter": (lambda v: v >= 1, ">= 1"),
    "rel_tol": (lambda v: v >= 0, ">= 0"),
    "passes": (lambda v: v >= 1, ">= 1"),
    "sign": (lambda v: v in ("add", "subtract"), "add or subtract"),
    "group": (lambda v: v >= 1, ">= 1"),
    "f": (lambda v: v >= 1, ">= 1"),
    "G": (lambda v: v >= 2, ">= 2"),
    "n": (lambda v: v >= 1, ">= 1"),
    "sparsity": (lambda v: v >= 0, ">= 0"),
    "noise": (lambda v: v >= 0, ">= 0"),
    "format": (lambda v: v in ("txt", "pgm"), "txt or pgm"),
}


@dataclass
class RunConfig:
    lam: float = None
    gamma: float = None
    k: int = None
    m: int = None
    max_outer_iter: int = None
    rel_tol: float = None
    seed: int = None
    center: bool = None
    manifest: str = None
    model: str = None
    out: str = None
    passes: int = None
    sign: str = None
    group: int = None
    f: int = None
    G: int = None
    n: int = None
    sparsity: int = None
    noise: float = None
    format: str = None

    def validate(self):
        for name, (ok, what) in CHECKS.items():
            value = getattr(self, name)
            if value is not None and not ok(value):
                raise ConfigError(f"{name} must be {what}, got {value!r}")
        return self

    def merged(self, **overrides):
        """Return a copy with every non-None override applied (CLI flags win over the file)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None}).validate()

    def hyper(self):
        """HyperParams with unset keys left at their defaults (lambda 0.01, gamma 0.1, k 70)."""
        given = {name: getattr(self, name) for name in ("lam", "gamma", "k", "m", "max_outer_iter", "rel_tol", "center")
                 if getattr(self, name) is not None}
        if self.seed is not None:
            given["rng_seed"] = self.seed
        return HyperParams(**given)


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parse = KEYS[key]
        try:
            values[attr] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values).validate()


def load_config(path):
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing config file: {path}")
    return parse_config(path.read_text())


def format_config(cfg):
    attr_to_key = {attr: key for key, (attr, _) in KEYS.items()}
    return "".join(f"{attr_to_key[f.name]} = {getattr(cfg, f.name)}\n"
                   for f in fields(cfg) if getattr(cfg, f.name) is not None)
