"""Experiment configuration and its YAML file format.

A config file is a flat YAML mapping with two optional nested sections,
``decomposition`` and ``mmwave``. Angles in the ``mmwave`` section are in
degrees; everything past :meth:`MmWaveConfig.params` works in radians.

Example::

    channel_family: rayleigh
    nt: 256
    nr: 64
    ns: 8
    mt: 12
    mr: 12
    snr_grid_db: [-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0]
    trials: 100
    seed: 0
    quant_bits: 2
    waterfill: false
    schemes: [svd_unconstrained, md_hp, md_hp_quantized]
    decomposition:
      convergence_tol: 1.0e-05
      threshold_mode: adaptive
"""
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .channel import MmWaveParams, UlaGeometry
from .decomposer import DecompositionSettings

SCHEMES = ("svd_unconstrained", "md_hp", "md_hp_quantized")
FAMILIES = ("rayleigh", "mmwave")
DEFAULT_SNR_GRID = tuple(float(v) for v in np.arange(-40.0, 0.1, 5.0))


class ConfigError(ValueError):
    """Invalid configuration; ``field`` and ``line`` locate the offending entry."""

    def __init__(self, message, field=None, line=None, path=None):
        self.message, self.field, self.line, self.path = message, field, line, path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        if field is not None:
            where += f" field '{field}':"
        super().__init__(f"{where} {message}".strip())


@dataclass
class MmWaveConfig:
    clusters: int = 8
    paths_per_cluster: int = 10
    tx_sector_deg: tuple = (-30.0, 30.0)
    rx_sector_deg: tuple = (-180.0, 180.0)
    tx_spread_deg: float = 7.5
    rx_spread_deg: float = 7.5
    spacing_over_wavelength: float = 0.5

    def params(self, nt, nr):
        d = self.spacing_over_wavelength
        return MmWaveParams(
            tx_geometry=UlaGeometry(nt, d),
            rx_geometry=UlaGeometry(nr, d),
            clusters=self.clusters,
            paths_per_cluster=self.paths_per_cluster,
            tx_sector=tuple(np.deg2rad(self.tx_sector_deg)),
            rx_sector=tuple(np.deg2rad(self.rx_sector_deg)),
            tx_spread=float(np.deg2rad(self.tx_spread_deg)),
            rx_spread=float(np.deg2rad(self.rx_spread_deg)),
        )


@dataclass
class ExperimentConfig:
    channel_family: str = "rayleigh"
    nt: int = 256
    nr: int = 64
    ns: int = 8
    mt: int = 12
    mr: int = 12
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    trials: int = 100
    seed: int = 0
    quant_bits: int = None
    waterfill: bool = False
    schemes: tuple = ("svd_unconstrained", "md_hp")
    trace_entry: tuple = (0, 4)
    decomposition: DecompositionSettings = field(default_factory=DecompositionSettings)
    mmwave: MmWaveConfig = None

    def validate(self, lines=None):
        lines = lines or {}

        def fail(name, msg):
            raise ConfigError(msg, field=name, line=lines.get(name))

        if self.channel_family not in FAMILIES:
            fail("channel_family", f"must be one of {FAMILIES}, got {self.channel_family!r}")
        for name in ("nt", "nr", "ns", "mt", "mr", "trials"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                fail(name, f"must be a positive integer, got {v!r}")
        if not self.ns <= self.mt <= self.nt:
            fail("mt", f"need ns <= mt <= nt, got ns={self.ns} mt={self.mt} nt={self.nt}")
        if not self.ns <= self.mr <= self.nr:
            fail("mr", f"need ns <= mr <= nr, got ns={self.ns} mr={self.mr} nr={self.nr}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            fail("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        if len(self.snr_grid_db) == 0:
            fail("snr_grid_db", "must list at least one SNR")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            fail("schemes", f"unknown or missing schemes {bad}; choose from {SCHEMES}")
        if self.quant_bits is not None and (not isinstance(self.quant_bits, int) or self.quant_bits < 1):
            fail("quant_bits", f"must be a positive integer, got {self.quant_bits!r}")
        if "md_hp_quantized" in self.schemes and self.quant_bits is None:
            fail("quant_bits", "required by scheme md_hp_quantized")
        if len(self.trace_entry) != 2 or min(self.trace_entry) < 0:
            fail("trace_entry", f"must be a (row, column) pair of non-negative integers, got {self.trace_entry!r}")
        if self.channel_family == "mmwave" and self.mmwave is None:
            self.mmwave = MmWaveConfig()
        if self.mmwave is not None:
            try:
                self.mmwave.params(self.nt, self.nr)
            except ValueError as exc:
                fail("mmwave", str(exc))
        return self

    def channel_params(self):
        return self.mmwave.params(self.nt, self.nr) if self.channel_family == "mmwave" else None

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "decomposition":
                v = asdict(v)
                v["increment_bounds"] = list(v["increment_bounds"])
            elif f.name == "mmwave":
                if v is None:
                    continue
                v = asdict(v)
                v["tx_sector_deg"] = list(v["tx_sector_deg"])
                v["rx_sector_deg"] = list(v["rx_sector_deg"])
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def default_config(kind="sweep"):
    """Defaults reproduce the convergence study or the 12-chain Rayleigh sweep."""
    if kind == "convergence":
        return ExperimentConfig(ns=4, mt=6, mr=6, trials=1)
    if kind == "single":
        return ExperimentConfig(trials=1, snr_grid_db=(0.0,))
    return ExperimentConfig(quant_bits=2, schemes=SCHEMES)


def _line_map(node, prefix=""):
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            name = prefix + str(key.value)
            lines[name] = key.start_mark.line + 1
            lines.update(_line_map(value, name + "."))
    return lines


def _section(cls, data, name, lines):
    if not isinstance(data, dict):
        raise ConfigError("must be a mapping", field=name, line=lines.get(name))
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", field=f"{name}.{key}", line=lines.get(f"{name}.{key}"))
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=name, line=lines.get(name)) from exc


def parse_config(text, base=None):
    """Parse YAML text into a validated config, filling omitted keys from ``base``."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1)
    lines = _line_map(node)
    cfg = base if base is not None else ExperimentConfig()
    values = asdict(cfg)
    values.pop("decomposition")
    values.pop("mmwave")
    known = {f.name for f in fields(ExperimentConfig)}
    decomposition, mmwave = cfg.decomposition, cfg.mmwave
    for key, value in data.items():
        if key not in known:
            raise ConfigError("unknown key", field=key, line=lines.get(key))
        if key == "decomposition":
            merged = {**asdict(decomposition), **(value or {})} if isinstance(value, dict) else value
            decomposition = _section(DecompositionSettings, merged, key, lines)
        elif key == "mmwave":
            if value is None:
                mmwave = None
            else:
                merged = {**asdict(mmwave or MmWaveConfig()), **value} if isinstance(value, dict) else value
                mmwave = _section(MmWaveConfig, merged, key, lines)
        else:
            values[key] = tuple(value) if isinstance(value, list) else value
    try:
        values["snr_grid_db"] = tuple(float(v) for v in values["snr_grid_db"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("must be a list of numbers", field="snr_grid_db", line=lines.get("snr_grid_db")) from exc
    cfg = ExperimentConfig(**values, decomposition=decomposition, mmwave=mmwave)
    return cfg.validate(lines)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_config(text, base)
    except ConfigError as exc:
        raise ConfigError(exc.message, exc.field, exc.line, path) from exc


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
