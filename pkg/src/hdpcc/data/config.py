"""Run configuration and its `key = value` file format."""
from dataclasses import dataclass, fields, asdict

from ..errors import ConfigError, ParseError


@dataclass
class RunConfig:
    M: int = 10
    nu1: float = 1.0
    nu2: float = 1.0
    iterations: int = 1000
    burnin: int = 200
    thin: int = 1
    seed: int = 0
    workers: int = 1
    # alpha = scale * exp(offset + mu + beta . e)
    scale_G: float = 1.0
    offset_G: float = 0.0
    scale_G0: float = 1.0
    offset_G0: float = 0.0
    scale_H: float = 1.0
    offset_H: float = 0.0
    mu_lower: float = 0.0
    mu_upper: float = 1.0
    beta_lower: float = -1.0
    beta_upper: float = 1.0
    eps_quantile: float = 0.55
    r_cov: int = 50
    eps_trunc: float = 1e-10
    tmcmc_mix: float = 0.5
    tmcmc_add_scale: float = 0.05
    tmcmc_mult_scale: float = 0.05
    tmcmc_steps: int = 5
    presim_atoms: int = 1024
    max_atoms: int = 10_000_000
    record_covariance: bool = False
    record_dpl: bool = True

    @property
    def consts(self):
        return ((self.scale_G, self.offset_G), (self.scale_G0, self.offset_G0),
                (self.scale_H, self.offset_H))

    def problems(self):
        bad = []
        if self.M < 2:
            bad.append("M")
        if not self.nu1 > 0:
            bad.append("nu1")
        if not self.nu2 > 0:
            bad.append("nu2")
        if self.iterations < 1:
            bad.append("iterations")
        if not 0 <= self.burnin < self.iterations:
            bad.append("burnin")
        if self.thin < 1:
            bad.append("thin")
        if not 0 <= self.seed < 2 ** 64:
            bad.append("seed")
        if self.workers < 1:
            bad.append("workers")
        for lv in ("G", "G0", "H"):
            if not getattr(self, "scale_" + lv) > 0:
                bad.append("scale_" + lv)
        if not self.mu_lower < self.mu_upper:
            bad.append("mu_upper")
        if not self.beta_lower < self.beta_upper:
            bad.append("beta_upper")
        if not 0 < self.eps_quantile < 1:
            bad.append("eps_quantile")
        if self.r_cov < 2:
            bad.append("r_cov")
        if not 0 < self.eps_trunc <= 1e-6:
            bad.append("eps_trunc")
        if not 0 <= self.tmcmc_mix <= 1:
            bad.append("tmcmc_mix")
        if not self.tmcmc_add_scale > 0:
            bad.append("tmcmc_add_scale")
        if not self.tmcmc_mult_scale > 0:
            bad.append("tmcmc_mult_scale")
        if self.tmcmc_steps < 1:
            bad.append("tmcmc_steps")
        if self.presim_atoms < 1:
            bad.append("presim_atoms")
        if self.max_atoms < self.presim_atoms:
            bad.append("max_atoms")
        return bad

    def validate(self):
        bad = self.problems()
        if bad:
            raise ConfigError("invalid config values: " + ", ".join(bad), bad)
        return self

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(typ, text):
    typ = typ if isinstance(typ, str) else typ.__name__
    if typ == "bool":
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(text)
    if typ == "int":
        return int(float(text)) if "e" in text.lower() else int(text)
    return float(text)


def parse_config(text, base=None) -> RunConfig:
    vals = {}
    unknown, badval = [], []
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ParseError("expected `key = value`", n)
        key, val = (x.strip() for x in s.split("=", 1))
        if key not in _TYPES:
            unknown.append(key)
            continue
        try:
            vals[key] = _convert(_TYPES[key], val)
        except ValueError:
            badval.append(key)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown), unknown)
    if badval:
        raise ConfigError("unparseable config values: " + ", ".join(badval), badval)
    cfg = (base or RunConfig()).replace(**vals)
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else repr(v)}")
    return "\n".join(out) + "\n"
