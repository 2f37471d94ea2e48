"""Run configuration: five JSON sections mapped onto dataclasses.

Resolution order is defaults, then ``--preset``, then ``--config``, then
explicit command-line flags. Unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

from .dualtime import DualTimeConfig
from .schemes import load_tableau, make_bdf, make_ssprk3


class ConfigError(ValueError):
    pass


@dataclass
class SchemeSection:
    tableau: object = "ssprk3"      # "ssprk3" or a {stages, A, b} record
    bdf: int = 2
    smoother: str = "erk"
    ej_kappa: float = 0.5


@dataclass
class SpaceSection:
    p: int = 4
    alpha: list = field(default_factory=lambda: [1.0, 0.5])
    mu: float = 0.0
    h: float = 1.0
    nodes: str = "legendre"
    k: float | None = None          # explicit wavenumber (operators dump)


@dataclass
class DualTimeSection:
    dt: float = 0.07
    dtau: float = 7e-3
    M: int = 1
    m_list: list = field(default_factory=lambda: [1])


@dataclass
class CycleSection:
    name: str = "vap"
    names: list = field(default_factory=lambda: ["base", "v1", "v3", "vap"])
    n_cycles: int = 200
    f_tau: float = 1.0


@dataclass
class SweepSection:
    khat: list = field(default_factory=lambda: [0.39269908169872414])
    m_max: int = 200
    mode: str = "explicit"
    orders: list = field(default_factory=lambda: [1, 2, 3, 4])
    mu_list: list = field(default_factory=lambda: [0.0])
    dt_list: list = field(default_factory=lambda: [1.0])
    ratios: list | None = None
    dtau_factor: float = 0.078
    x_range: list = field(default_factory=lambda: [-6.0, 1.0])
    y_range: list = field(default_factory=lambda: [-5.0, 5.0])
    n: int = 401
    n_k: int = 64
    random_draws: int = 0


@dataclass
class RunConfig:
    scheme: SchemeSection = field(default_factory=SchemeSection)
    space: SpaceSection = field(default_factory=SpaceSection)
    dualtime: DualTimeSection = field(default_factory=DualTimeSection)
    cycle: CycleSection = field(default_factory=CycleSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, record: dict) -> "RunConfig":
        """Copy with ``record`` (partial, sectioned) laid over this config."""
        if not isinstance(record, dict):
            raise ConfigError("config must be a JSON object")
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        for sec, vals in record.items():
            if sec not in out:
                raise ConfigError(f"unknown config section {sec!r}")
            if not isinstance(vals, dict):
                raise ConfigError(f"section {sec!r} must be an object")
            current = out[sec]
            known = {f.name for f in fields(current)}
            bad = set(vals) - known
            if bad:
                raise ConfigError(f"unknown key(s) in {sec!r}: {', '.join(sorted(bad))}")
            out[sec] = replace(current, **vals)
        return RunConfig(**out)

    def tableau(self):
        tab = self.scheme.tableau
        if tab == "ssprk3":
            return make_ssprk3()
        if isinstance(tab, dict):
            return load_tableau(tab)
        raise ConfigError(f"tableau must be 'ssprk3' or a record, got {tab!r}")

    def dual_time(self, **overrides) -> DualTimeConfig:
        d = self.dualtime
        kw = dict(dt=d.dt, dtau=d.dtau, M=d.M, bdf=make_bdf(self.scheme.bdf), tab=self.tableau())
        kw.update(overrides)
        return DualTimeConfig(**kw)


def preset_names() -> list:
    root = resources.files("pmgfourier") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("pmgfourier") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(preset_names())})")
    return json.loads(path.read_text())


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None


def resolve(preset: str | None = None, config_path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if preset:
        cfg = cfg.merged(load_preset(preset))
    if config_path:
        cfg = cfg.merged(load_config_file(config_path))
    if overrides:
        cfg = cfg.merged(overrides)
    return cfg
