"""Scenario files: TOML tables describing one run of the model."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .densities import MixtureDensity1D, ParameterLaw
from .errors import ContractError
from .model_rm import MODEL_NAME
from .randeq import GridSpec2D, NoiseSpec
from .stability import DEFAULT_SIGMA_GRID, ProbePoint
from .verify import NewtonConfig, OdeConfig

PARAM_NAMES = ("k", "m", "c")
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class SteadySettings:
    noise: NoiseSpec
    grid: GridSpec2D
    peak_threshold: float = 0.05
    merge_radius: int = 3
    peak_window: GridSpec2D | None = None


@dataclass(frozen=True)
class EigSettings:
    noise: NoiseSpec
    sigma_grid: GridSpec2D = DEFAULT_SIGMA_GRID
    probes: tuple[ProbePoint, ...] = ()


@dataclass(frozen=True)
class KappaSettings:
    region: GridSpec2D
    method: str = "direct"
    sigma_grid: GridSpec2D | None = None


@dataclass(frozen=True)
class VerifySettings:
    grid: GridSpec2D
    n: int = 240000
    n_ode: int = 20000
    newton: NewtonConfig = NewtonConfig()
    ode: OdeConfig = OdeConfig()


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    law: ParameterLaw
    n_samples: int
    seed: int
    steady: SteadySettings
    eig: EigSettings | None = None
    kappa: KappaSettings | None = None
    verify: VerifySettings | None = None
    sweep_stds: tuple[float, ...] = ()
    model: str = MODEL_NAME
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def scenario_hash(self):
        """sha256 of the canonical JSON form of the parsed file (first 16 hex digits)."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw.setdefault("scenario", {})["seed"] = int(seed)
        return replace(self, seed=int(seed), raw=raw)


def _grid(d, where):
    try:
        return GridSpec2D(d["x_min"], d["x_max"], d["y_min"], d["y_max"], d["nx"], d["ny"])
    except KeyError as exc:
        raise ContractError(f"{where}: missing grid key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ContractError(f"{where}: {exc}") from None


def _mixture(comps, floor, where):
    try:
        return MixtureDensity1D(tuple(tuple(c) for c in comps), floor)
    except (TypeError, ValueError) as exc:
        raise ContractError(f"{where}: {exc}") from None


def _noise(stds, where):
    try:
        return NoiseSpec(tuple(stds))
    except (TypeError, ValueError) as exc:
        raise ContractError(f"{where}: {exc}") from None


def parse_config(raw: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a decoded TOML document."""
    try:
        sc = raw["scenario"]
        params = raw["parameters"]
        steady = raw["steady"]
    except KeyError as exc:
        raise ContractError(f"scenario file lacks table {exc}") from None
    model = sc.get("model", MODEL_NAME)
    if model != MODEL_NAME:
        raise ContractError(f"unknown model {model!r}")
    n_samples = int(sc.get("n_samples", 24000))
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")

    floor = params.get("support_floor", DEFAULT_FLOOR)
    missing = [p for p in PARAM_NAMES if p not in params]
    if missing:
        raise ContractError(f"parameters table lacks {', '.join(missing)}")
    law = ParameterLaw([_mixture(params[p], floor, f"parameters.{p}") for p in PARAM_NAMES],
                       PARAM_NAMES)

    st = SteadySettings(
        _noise(steady.get("noise_stds", [0.005, 0.005]), "steady.noise_stds"),
        _grid(steady["grid"], "steady.grid"),
        float(steady.get("peak_threshold", 0.05)),
        int(steady.get("merge_radius", 3)),
        _grid(steady["peak_window"], "steady.peak_window") if "peak_window" in steady else None,
    )

    eig = None
    if "eig" in raw:
        e = raw["eig"]
        probes = tuple(ProbePoint((p["x"], p["y"]), str(p["label"])) for p in e.get("probes", []))
        labels = [p.label for p in probes]
        if len(set(labels)) != len(labels):
            raise ContractError("probe labels must be unique")
        eig = EigSettings(
            _noise(e.get("noise_stds", [0.005, 0.005]), "eig.noise_stds"),
            _grid(e["sigma_grid"], "eig.sigma_grid") if "sigma_grid" in e else DEFAULT_SIGMA_GRID,
            probes,
        )

    kappa = None
    if "kappa" in raw:
        k = raw["kappa"]
        method = k.get("method", "direct")
        if method not in ("direct", "grid"):
            raise ContractError(f"kappa.method must be 'direct' or 'grid', got {method!r}")
        sg = _grid(k["sigma_grid"], "kappa.sigma_grid") if "sigma_grid" in k else None
        if method == "grid" and eig is None:
            raise ContractError("kappa.method = 'grid' needs an [eig] table for the noise stds")
        kappa = KappaSettings(_grid(k["region"], "kappa.region"), method, sg)

    ver = None
    if "verify" in raw:
        v = raw["verify"]
        try:
            ver = VerifySettings(
                _grid(v["grid"], "verify.grid"),
                int(v.get("n", 240000)),
                int(v.get("n_ode", 20000)),
                NewtonConfig(**v.get("newton", {})),
                OdeConfig(**v.get("ode", {})),
            )
        except TypeError as exc:
            raise ContractError(f"verify: {exc}") from None

    sweep = tuple(float(s) for s in raw.get("sweep", {}).get("noise_stds", []))
    return ScenarioConfig(str(sc.get("name", "scenario")), law, n_samples, int(sc.get("seed", 0)),
                          st, eig, kappa, ver, sweep, model, str(sc.get("description", "")), raw)


def load_config(path) -> ScenarioConfig:
    """Read a scenario file; a bare name like ``sim00`` selects a shipped scenario."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name in shipped_scenarios():
        data = resources.files(__package__).joinpath("scenarios", p.name + ".toml").read_bytes()
    else:
        data = p.read_bytes()
    try:
        raw = tomllib.loads(data.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ContractError(f"{path}: {exc}") from None
    return parse_config(raw)


def shipped_scenarios():
    root = resources.files(__package__).joinpath("scenarios")
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".toml"))
