"""Run and campaign configuration, loaded from INI files.

A registration config lives in a ``[register]`` section; a benchmark config
has a ``[bench]`` section plus one ``[method:<label>]`` section per solver
variant. Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError
from .features import FeatureParams
from .solver import GncConfig
from .splitting import SCHEMES, SELECTIONS, SplitConfig
from .synthbench import DecoyConfig, Method, ScenarioConfig

CONFIG_ENV = "SPLITGNC_CONFIG"

PRESETS = {
    "redwood": {"voxel_size": 0.05},
    "synthetic": {"voxel_size": 0.02},
}


@dataclass(frozen=True)
class RunConfig:
    voxel_size: float = 0.05
    normal_radius: float | None = None   # default 2 x voxel_size
    feature_radius: float | None = None  # default 5 x voxel_size
    alpha0: float | None = None
    beta: float = 0.5
    epsilon: float = 1e-6
    max_iterations: int = 100
    num_splits: int = 4
    scheme: str = "contiguous"
    selection: str = "subcloud"
    seed: int = 0
    threshold_rot_deg: float = 10.0
    threshold_trans_m: float = 1.0

    def __post_init__(self):
        for name in ("voxel_size", "threshold_rot_deg", "threshold_trans_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("normal_radius", "feature_radius"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be > 0, got {v}")
        # surface module-level checks with the field name attached
        self.gnc()
        self.split()

    def gnc(self):
        try:
            return GncConfig(alpha0=self.alpha0, beta=self.beta, epsilon=self.epsilon,
                             max_iterations=self.max_iterations)
        except ConfigError as exc:
            raise ConfigError(f"invalid solver setting: {exc}") from None

    def split(self):
        try:
            return SplitConfig(num_splits=self.num_splits, scheme=self.scheme,
                               seed=self.seed, selection=self.selection)
        except ConfigError as exc:
            raise ConfigError(f"invalid split setting: {exc}") from None

    def features(self):
        return FeatureParams(
            voxel_size=self.voxel_size,
            normal_radius_factor=(self.normal_radius / self.voxel_size) if self.normal_radius else 2.0,
            feature_radius_factor=(self.feature_radius / self.voxel_size) if self.feature_radius else 5.0,
        )

    def echo(self):
        return asdict(self)


_RUN_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(section, key, raw, kind):
    raw = raw.strip()
    try:
        if kind == "optional_float":
            return None if raw.lower() in ("", "none", "auto") else float(raw)
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "float_list":
            return [float(x) for x in raw.replace(",", " ").split()]
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind.replace('_', ' ')}") from None


def _run_kind(name):
    if name in ("alpha0", "normal_radius", "feature_radius"):
        return "optional_float"
    if name in ("max_iterations", "num_splits", "seed"):
        return "int"
    if name in ("scheme", "selection"):
        return "str"
    return "float"


def run_overrides(section_name, section):
    out = {}
    for key, raw in section.items():
        if key not in _RUN_FIELDS:
            raise ConfigError(f"[{section_name}] unknown key {key!r}")
        out[key] = _convert(section_name, key, raw, _run_kind(key))
    if "scheme" in out and out["scheme"] not in SCHEMES:
        raise ConfigError(f"[{section_name}] scheme: expected one of {SCHEMES}, got {out['scheme']!r}")
    if "selection" in out and out["selection"] not in SELECTIONS:
        raise ConfigError(f"[{section_name}] selection: expected one of {SELECTIONS}, got {out['selection']!r}")
    return out


def _read_ini(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parser


def load_run_config(path=None, preset=None, **overrides) -> RunConfig:
    """Defaults, then preset, then the ``[register]`` section of ``path``, then ``overrides``.

    ``path=None`` falls back to the file named by ``$SPLITGNC_CONFIG`` if set.
    """
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    path = path or os.environ.get(CONFIG_ENV) or None
    if path:
        parser = _read_ini(path)
        if parser.has_section("register"):
            values.update(run_overrides("register", parser["register"]))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class BenchConfig:
    scenarios: list
    methods: list
    source: str = "builtin"
    source_points: int = 5000
    source_seed: int = 0
    voxel_size: float = 0.042
    timing: bool = True
    threshold_rot_deg: float = 10.0
    threshold_trans_m: float = 1.0


_BENCH_KEYS = {
    "outlier_rates": "float_list", "trials": "int", "seed": "int",
    "source": "str", "source_points": "int", "source_seed": "int", "voxel_size": "float",
    "inlier_noise_sigma": "float", "rotation_magnitude": "optional_float",
    "translation_magnitude": "float", "decoy_fraction": "optional_float",
    "sphere_radius": "float", "timing": "bool",
    "threshold_rot_deg": "float", "threshold_trans_m": "float",
}


def load_bench_config(path) -> BenchConfig:
    parser = _read_ini(path)
    if not parser.has_section("bench"):
        raise ConfigError(f"{path}: missing [bench] section")
    sec = parser["bench"]
    vals = {}
    for key, raw in sec.items():
        if key not in _BENCH_KEYS:
            raise ConfigError(f"[bench] unknown key {key!r}")
        vals[key] = _convert("bench", key, raw, _BENCH_KEYS[key])
    if "outlier_rates" not in vals or not vals["outlier_rates"]:
        raise ConfigError("[bench] outlier_rates: at least one rate is required")
    decoy = None
    if vals.get("decoy_fraction") is not None:
        decoy = DecoyConfig(decoy_fraction=vals["decoy_fraction"])
    scenarios = []
    for rate in vals["outlier_rates"]:
        try:
            scenarios.append(ScenarioConfig(
                outlier_rate=rate,
                inlier_noise_sigma=vals.get("inlier_noise_sigma", 0.0),
                rotation_magnitude=vals.get("rotation_magnitude"),
                translation_magnitude=vals.get("translation_magnitude", 2.0),
                trials=vals.get("trials", 40),
                seed=vals.get("seed", 0),
                decoy=decoy,
                sphere_radius=vals.get("sphere_radius", 1.0),
            ))
        except ConfigError as exc:
            raise ConfigError(f"[bench] outlier_rates={rate}: {exc}") from None

    methods = []
    for name in parser.sections():
        if not name.startswith("method:"):
            if name != "bench":
                raise ConfigError(f"{path}: unexpected section [{name}]")
            continue
        label = name.split(":", 1)[1].strip()
        if not label:
            raise ConfigError(f"[{name}] method label is empty")
        over = run_overrides(name, parser[name])
        try:
            rc = replace(RunConfig(), **over)
        except ConfigError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
        methods.append(Method(label, rc.gnc(), rc.split()))
    if not methods:
        methods = [Method("gnc-gm-s1", split=SplitConfig(num_splits=1)),
                   Method("gnc-gm-s4", split=SplitConfig(num_splits=4))]
    extra = {k: vals[k] for k in ("source", "source_points", "source_seed", "voxel_size", "timing",
                                  "threshold_rot_deg", "threshold_trans_m") if k in vals}
    return BenchConfig(scenarios=scenarios, methods=methods, **extra)
