"""YAML configuration: crop, site, and agromanagement files.

An agromanagement file has exactly 14 entries naming the crop/site pair,
location, calendar, horizon, weather source, limitation mode, decision
interval, and seed. Crop and site files hold every model parameter, with
named varieties/variations as shallow parameter overlays. Any parameter can
be overridden from the command line with dotted ``ag.`` / ``crop.`` /
``site.`` paths, and every resolved run can be dumped to a single snapshot
that reloads to the identical bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from datetime import date as Date, timedelta
from importlib import resources
from pathlib import Path

import yaml

from .canopy import CanopyParams
from .phenology import PhenologyParams
from .soil import LIMITATION_MODES, SiteParams
from .weather import (MAX_LATITUDE, WeatherSeries, load_weather_table,
                      synth_weather_span)


class ValidationError(ValueError):
    """Configuration rejected: schema, type, or invariant violation."""


AGRO_KEYS = (
    "crop_name", "crop_variety", "site_name", "site_variation",
    "latitude", "longitude", "year", "sow_date", "max_duration_days",
    "n_seasons", "weather_source", "limitation_mode", "step_interval_days",
    "random_seed",
)


@dataclass(frozen=True)
class AgroConfig:
    crop_name: str
    crop_variety: str
    site_name: str
    site_variation: str
    latitude: float
    longitude: float
    year: int
    sow_date: str  # MM-DD
    max_duration_days: int
    n_seasons: int
    weather_source: str  # "synthetic" or a weather CSV path
    limitation_mode: str
    step_interval_days: int
    random_seed: int

    def validate(self) -> None:
        if self.limitation_mode not in LIMITATION_MODES:
            raise ValidationError(
                f"limitation_mode {self.limitation_mode!r} not in "
                f"{sorted(LIMITATION_MODES)}"
            )
        if self.n_seasons < 1:
            raise ValidationError("n_seasons must be >= 1")
        if self.step_interval_days < 1:
            raise ValidationError("step_interval_days must be >= 1")
        if self.max_duration_days < 1:
            raise ValidationError("max_duration_days must be >= 1")
        if abs(self.latitude) > MAX_LATITUDE:
            raise ValidationError(f"|latitude| must be <= {MAX_LATITUDE}")
        try:
            month, day = (int(x) for x in self.sow_date.split("-"))
            Date(2001, month, day)
        except Exception:
            raise ValidationError(f"sow_date must be MM-DD, got {self.sow_date!r}") from None

    def start_date(self) -> Date:
        month, day = (int(x) for x in self.sow_date.split("-"))
        return Date(self.year, month, day)

    def horizon_days(self) -> int:
        return self.max_duration_days * self.n_seasons


# Crop YAML parameter keys -> (section, attribute). Sections: "phenology",
# "canopy", "crop" (top-level CropConfig fields).
_CROP_KEYS: dict[str, tuple[str, str]] = {
    "TBASE": ("phenology", "tbase"),
    "TSUM1": ("phenology", "tsum1"),
    "TSUM2": ("phenology", "tsum2"),
    "CHILL_REQ": ("phenology", "chill_req"),
    "FORCE_BB": ("phenology", "force_bb"),
    "FORCE_BL": ("phenology", "force_bl"),
    "FORCE_VE": ("phenology", "force_ve"),
    "DLCRIT": ("phenology", "dlcrit"),
    "TCHILL_MAX": ("phenology", "tchill_max"),
    "DORM_MIN": ("phenology", "dorm_min"),
    "STAG_MAX": ("phenology", "stag_max"),
    "TRELEASE": ("phenology", "trelease"),
    "EPS": ("canopy", "eps"),
    "K_EXT": ("canopy", "k_ext"),
    "SLA": ("canopy", "sla"),
    "Q10": ("canopy", "q10"),
    "MAINT_RT": ("canopy", "maint_roots"),
    "MAINT_ST": ("canopy", "maint_stems"),
    "MAINT_LV": ("canopy", "maint_leaves"),
    "MAINT_SO": ("canopy", "maint_storage"),
    "PART_TABLE": ("canopy", "part_table"),
    "DEATH_TABLE": ("canopy", "death_table"),
    "A_AGE": ("canopy", "a_age"),
    "B_AGE": ("canopy", "b_age"),
    "DEMAND_N": ("crop", "demand_n"),
    "DEMAND_P": ("crop", "demand_p"),
    "DEMAND_K": ("crop", "demand_k"),
    "TRANSP_MAX": ("crop", "transp_max"),
    "REGROW_LV": ("crop", "regrow_leaves"),
    "INIT_RT": ("crop", "init_roots"),
    "INIT_ST": ("crop", "init_stems"),
    "INIT_LV": ("crop", "init_leaves"),
    "INIT_SO": ("crop", "init_storage"),
}

_SITE_KEYS = (
    "porosity", "field_capacity", "wilting_point", "sm_crit", "root_depth",
    "r_abs", "r_abs_wet", "r_up", "runoff_surface_threshold",
    "runoff_water_threshold", "runoff_loss_frac", "perc_rate", "evap_base",
    "init_sm", "init_surface_n", "init_surface_p", "init_surface_k",
    "init_subsoil_n", "init_subsoil_p", "init_subsoil_k",
)


@dataclass(frozen=True)
class CropConfig:
    name: str
    variety: str
    perennial: bool
    phenology: PhenologyParams
    canopy: CanopyParams
    demand_n: float  # kg element per kg new dry matter
    demand_p: float
    demand_k: float
    transp_max: float  # cm/day at full canopy closure
    regrow_leaves: float  # kg/ha leaf mass restored at dormancy release
    init_roots: float
    init_stems: float
    init_leaves: float
    init_storage: float

    def validate(self) -> None:
        self.phenology.validate()
        self.canopy.validate()
        for name in ("demand_n", "demand_p", "demand_k", "transp_max",
                     "regrow_leaves", "init_roots", "init_stems",
                     "init_leaves", "init_storage"):
            if getattr(self, name) < 0:
                raise ValidationError(f"crop parameter {name} must be >= 0")

    def param(self, key: str):
        section, attr = _CROP_KEYS[key]
        holder = self if section == "crop" else getattr(self, section)
        return getattr(holder, attr)

    def with_param(self, key: str, value) -> "CropConfig":
        if key not in _CROP_KEYS:
            raise ValidationError(
                f"unknown crop parameter {key!r}; known: {sorted(_CROP_KEYS)}"
            )
        section, attr = _CROP_KEYS[key]
        value = _coerce_like(self.param(key), value, f"crop.{key}")
        if section == "crop":
            return replace(self, **{attr: value})
        return replace(self, **{section: replace(getattr(self, section), **{attr: value})})


@dataclass(frozen=True)
class SiteConfig:
    name: str
    variation: str
    params: SiteParams
    init_sm: float
    init_surface_n: float
    init_surface_p: float
    init_surface_k: float
    init_subsoil_n: float
    init_subsoil_p: float
    init_subsoil_k: float

    def validate(self) -> None:
        self.params.validate()
        if not 0.0 <= self.init_sm <= self.params.porosity:
            raise ValidationError("init_sm must lie in [0, porosity]")
        for name in ("init_surface_n", "init_surface_p", "init_surface_k",
                     "init_subsoil_n", "init_subsoil_p", "init_subsoil_k"):
            if getattr(self, name) < 0:
                raise ValidationError(f"site parameter {name} must be >= 0")

    def param(self, key: str):
        if hasattr(self.params, key):
            return getattr(self.params, key)
        return getattr(self, key)

    def with_param(self, key: str, value) -> "SiteConfig":
        if key not in _SITE_KEYS:
            raise ValidationError(
                f"unknown site parameter {key!r}; known: {sorted(_SITE_KEYS)}"
            )
        value = _coerce_like(self.param(key), value, f"site.{key}")
        if hasattr(self.params, key):
            return replace(self, params=replace(self.params, **{key: value}))
        return replace(self, **{key: value})


@dataclass(frozen=True)
class RunBundle:
    """Fully resolved configuration for one simulation run."""

    agro: AgroConfig
    crop: CropConfig
    site: SiteConfig
    overrides: tuple[str, ...] = ()

    def validate(self) -> None:
        self.agro.validate()
        self.crop.validate()
        self.site.validate()

    def weather(self) -> WeatherSeries:
        """Series covering the run horizon from the configured source."""
        start = self.agro.start_date()
        end = start + timedelta(days=self.agro.horizon_days())
        if self.agro.weather_source == "synthetic":
            return synth_weather_span(self.agro.random_seed, self.agro.latitude,
                                      start.year, end.year)
        series = load_weather_table(self.agro.weather_source)
        if series.start > start or series.end < end:
            raise ValidationError(
                f"weather file covers [{series.start}, {series.end}] but the "
                f"run requires [{start}, {end}]"
            )
        return series

    def with_agro(self, **changes) -> "RunBundle":
        agro = replace(self.agro, **changes)
        agro.validate()
        return replace(self, agro=agro)


def _coerce_like(current, value, label: str):
    """Coerce an override value to the type of the current one."""
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        raise ValidationError(f"{label}: expected boolean, got {value!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{label}: expected number, got {value!r}")
        if float(value) != int(value):
            raise ValidationError(f"{label}: expected integer, got {value!r}")
        return int(value)
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{label}: expected number, got {value!r}")
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ValidationError(f"{label}: expected string, got {value!r}")
        return value
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ValidationError(f"{label}: expected a list, got {value!r}")
        return _as_table(value)
    raise ValidationError(f"{label}: unsupported parameter type {type(current).__name__}")


def _as_table(rows) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(x) for x in row) for row in rows)


def _data_dir() -> Path:
    return Path(str(resources.files("cropsim").joinpath("data")))


def list_crops() -> dict[str, list[str]]:
    """Bundled crop names mapped to their variety names."""
    out: dict[str, list[str]] = {}
    for f in sorted(_data_dir().joinpath("crops").glob("*.yaml")):
        doc = yaml.safe_load(f.read_text())
        out[doc["name"]] = sorted(doc.get("varieties", {"default": {}}))
    return out


def list_sites() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for f in sorted(_data_dir().joinpath("sites").glob("*.yaml")):
        doc = yaml.safe_load(f.read_text())
        out[doc["name"]] = sorted(doc.get("variations", {"default": {}}))
    return out


def _load_yaml(path: Path) -> dict:
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a YAML mapping")
    return doc


def _build_crop(name: str, variety: str, params: dict) -> CropConfig:
    unknown = sorted(set(params) - set(_CROP_KEYS) - {"PERENNIAL"})
    if unknown:
        raise ValidationError(f"crop {name!r}: unknown parameters {unknown}")
    missing = sorted(set(_CROP_KEYS) - set(params))
    if missing:
        raise ValidationError(f"crop {name!r}: missing parameters {missing}")
    sections: dict[str, dict] = {"phenology": {}, "canopy": {}, "crop": {}}
    for key, (section, attr) in _CROP_KEYS.items():
        value = params[key]
        if key in ("PART_TABLE", "DEATH_TABLE"):
            value = _as_table(value)
        elif key == "STAG_MAX":
            value = int(value)
        else:
            value = float(value)
        sections[section][attr] = value
    perennial = bool(params.get("PERENNIAL", False))
    phen = PhenologyParams(perennial=perennial, **sections["phenology"])
    can = CanopyParams(**sections["canopy"])
    crop = CropConfig(name=name, variety=variety, perennial=perennial,
                      phenology=phen, canopy=can, **sections["crop"])
    return crop


def load_crop(name: str, variety: str = "default") -> CropConfig:
    path = _data_dir() / "crops" / f"{name}.yaml"
    if not path.exists():
        raise ValidationError(
            f"unknown crop {name!r}; available: {sorted(list_crops())}"
        )
    doc = _load_yaml(path)
    varieties = doc.get("varieties", {"default": {}})
    if variety not in varieties:
        raise ValidationError(
            f"unknown variety {variety!r} of crop {name!r}; "
            f"available: {sorted(varieties)}"
        )
    params = dict(doc["params"])
    params["PERENNIAL"] = doc.get("perennial", False)
    params.update(varieties[variety] or {})
    return _build_crop(doc["name"], variety, params)


def load_site(name: str, variation: str = "default") -> SiteConfig:
    path = _data_dir() / "sites" / f"{name}.yaml"
    if not path.exists():
        raise ValidationError(
            f"unknown site {name!r}; available: {sorted(list_sites())}"
        )
    doc = _load_yaml(path)
    variations = doc.get("variations", {"default": {}})
    if variation not in variations:
        raise ValidationError(
            f"unknown variation {variation!r} of site {name!r}; "
            f"available: {sorted(variations)}"
        )
    params = dict(doc["params"])
    params.update(variations[variation] or {})
    unknown = sorted(set(params) - set(_SITE_KEYS))
    if unknown:
        raise ValidationError(f"site {name!r}: unknown parameters {unknown}")
    missing = sorted(set(_SITE_KEYS) - set(params))
    if missing:
        raise ValidationError(f"site {name!r}: missing parameters {missing}")
    site_params = SiteParams(**{k: float(params[k]) for k in
                                (f.name for f in fields(SiteParams))})
    init = {k: float(params[k]) for k in _SITE_KEYS if k.startswith("init_")}
    return SiteConfig(name=doc["name"], variation=variation,
                      params=site_params, **init)


def _parse_overrides(overrides) -> list[tuple[str, str, object]]:
    parsed = []
    for item in overrides:
        if isinstance(item, str):
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValidationError(f"override {item!r} must look like key=value")
            value = yaml.safe_load(raw)
        else:
            key, value = item
        key = key.strip()
        scope, sep, param = key.partition(".")
        if not sep or scope not in ("ag", "crop", "site"):
            raise ValidationError(
                f"override key {key!r} must start with 'ag.', 'crop.' or 'site.'"
            )
        parsed.append((scope, param, value))
    return parsed


def _agro_from_mapping(doc: dict, source: str) -> AgroConfig:
    missing = sorted(set(AGRO_KEYS) - set(doc))
    if missing:
        raise ValidationError(f"{source}: missing agromanagement keys {missing}")
    extra = sorted(set(doc) - set(AGRO_KEYS))
    if extra:
        raise ValidationError(f"{source}: unexpected agromanagement keys {extra}")
    kwargs = {}
    for f in fields(AgroConfig):
        value = doc[f.name]
        if f.type in ("int", int) or f.name in ("year", "max_duration_days",
                                                "n_seasons", "step_interval_days",
                                                "random_seed"):
            value = _coerce_like(0, value, f"ag.{f.name}")
        elif f.name in ("latitude", "longitude"):
            value = _coerce_like(0.0, value, f"ag.{f.name}")
        else:
            value = _coerce_like("", value, f"ag.{f.name}")
        kwargs[f.name] = value
    return AgroConfig(**kwargs)


def _apply_agro_override(agro: AgroConfig, param: str, value) -> AgroConfig:
    if param not in AGRO_KEYS:
        raise ValidationError(
            f"unknown agromanagement key {param!r}; known: {sorted(AGRO_KEYS)}"
        )
    current = getattr(agro, param)
    return replace(agro, **{param: _coerce_like(current, value, f"ag.{param}")})


def load_agro_config(path: str | Path, overrides=()) -> RunBundle:
    """Load an agromanagement file (or a run snapshot) and resolve it.

    ``ag.*`` overrides apply before the crop/site files are resolved so the
    crop or site themselves can be swapped; ``crop.*`` / ``site.*``
    overrides apply to the resolved parameters. Everything is re-validated
    afterwards.
    """
    path = Path(path)
    doc = _load_yaml(path)
    parsed = _parse_overrides(overrides)

    if "agro" in doc:  # run snapshot: crop/site parameters inline
        agro = _agro_from_mapping(doc["agro"], str(path))
        for scope, param, value in parsed:
            if scope == "ag":
                agro = _apply_agro_override(agro, param, value)
        crop_doc, site_doc = doc["crop"], doc["site"]
        crop = _build_crop(crop_doc["name"], crop_doc["variety"],
                           {**crop_doc["params"], "PERENNIAL": crop_doc["perennial"]})
        site_params = dict(site_doc["params"])
        site = SiteConfig(name=site_doc["name"], variation=site_doc["variation"],
                          params=SiteParams(**{k: float(v) for k, v in site_params.items()
                                               if not k.startswith("init_")}),
                          **{k: float(v) for k, v in site_params.items()
                             if k.startswith("init_")})
    else:
        agro = _agro_from_mapping(doc, str(path))
        for scope, param, value in parsed:
            if scope == "ag":
                agro = _apply_agro_override(agro, param, value)
        agro.validate()
        crop = load_crop(agro.crop_name, agro.crop_variety)
        site = load_site(agro.site_name, agro.site_variation)

    for scope, param, value in parsed:
        if scope == "crop":
            crop = crop.with_param(param, value)
        elif scope == "site":
            site = site.with_param(param, value)

    if not agro.weather_source == "synthetic":
        src = Path(agro.weather_source)
        if not src.is_absolute():
            agro = replace(agro, weather_source=str((path.parent / src).resolve()))

    bundle = RunBundle(agro=agro, crop=crop, site=site,
                       overrides=tuple(f"{s}.{p}={v!r}" for s, p, v in parsed))
    try:
        bundle.validate()
    except ValidationError:
        raise
    except ValueError as err:
        raise ValidationError(str(err)) from err
    return bundle


def _crop_to_doc(crop: CropConfig) -> dict:
    params = {key: crop.param(key) for key in _CROP_KEYS}
    params["PART_TABLE"] = [list(row) for row in params["PART_TABLE"]]
    params["DEATH_TABLE"] = [list(row) for row in params["DEATH_TABLE"]]
    return {"name": crop.name, "variety": crop.variety,
            "perennial": crop.perennial, "params": params}


def _site_to_doc(site: SiteConfig) -> dict:
    return {"name": site.name, "variation": site.variation,
            "params": {key: site.param(key) for key in _SITE_KEYS}}


def dump_run_config(bundle: RunBundle, out_dir: str | Path,
                    filename: str = "run_config.yaml") -> Path:
    """Write a single-file snapshot that reloads to the identical bundle."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "agro": {k: getattr(bundle.agro, k) for k in AGRO_KEYS},
        "crop": _crop_to_doc(bundle.crop),
        "site": _site_to_doc(bundle.site),
        "applied_overrides": list(bundle.overrides),
    }
    out = out_dir / filename
    out.write_text(yaml.safe_dump(doc, sort_keys=True))
    return out


def bundled_agro_path(name: str) -> Path:
    """Path of a packaged example agromanagement file (name without suffix)."""
    path = _data_dir() / "agro" / f"{name}.yaml"
    if not path.exists():
        available = sorted(p.stem for p in (_data_dir() / "agro").glob("*.yaml"))
        raise ValidationError(f"unknown bundled config {name!r}; available: {available}")
    return path
