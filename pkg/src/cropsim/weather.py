"""Daily weather series: CSV ingestion, seeded synthetic generation, day length.

A weather series is immutable once constructed and safe to share across
parallel simulations. Files use a CSV layout with a two-line metadata
preamble (latitude, longitude) followed by a header row; see
``load_weather_table``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date as Date, timedelta
from pathlib import Path

import numpy as np

# Day-length formula degenerates toward the polar circles.
MAX_LATITUDE = 66.0

# Synthetic generator constants (annual mean / half-amplitude in degC,
# coldest day-of-year in the respective hemisphere, noise half-widths).
SYNTH_T_MEAN = 12.0
SYNTH_T_AMPL = 10.0
SYNTH_T_PHASE_DAY = 15
SYNTH_T_NOISE = 2.0
SYNTH_RAIN_PROB = 0.35
SYNTH_RAIN_SCALE = 0.5  # cm, mean of the exponential-like wet-day tail


class WeatherError(ValueError):
    """Base class for weather ingestion/generation failures."""


class WeatherFileError(WeatherError):
    """File missing or structurally unreadable."""


class DateGapError(WeatherError):
    """A day is missing from an otherwise ordered series."""


class DateOrderError(WeatherError):
    """Dates are not strictly increasing."""


class WeatherRangeError(WeatherError):
    """A value violates the physical range invariants."""


@dataclass(frozen=True, slots=True)
class WeatherDay:
    """One day of weather forcing."""

    date: Date
    t_min: float  # degC
    t_max: float  # degC
    t_avg: float  # degC
    irradiation: float  # MJ/m2/day
    rainfall: float  # cm/day
    wind: float  # m/s
    vapor_pressure: float  # hPa

    def validate(self) -> None:
        if not (self.t_min <= self.t_avg <= self.t_max):
            raise WeatherRangeError(
                f"{self.date}: t_min <= t_avg <= t_max violated "
                f"({self.t_min}, {self.t_avg}, {self.t_max})"
            )
        if self.irradiation < 0:
            raise WeatherRangeError(f"{self.date}: irradiation < 0")
        if self.rainfall < 0:
            raise WeatherRangeError(f"{self.date}: rainfall < 0")
        if self.wind < 0:
            raise WeatherRangeError(f"{self.date}: wind < 0")
        if self.vapor_pressure <= 0:
            raise WeatherRangeError(f"{self.date}: vapor_pressure <= 0")


@dataclass(frozen=True)
class WeatherSeries:
    """Gap-free daily series at a fixed location."""

    latitude: float
    longitude: float
    days: tuple[WeatherDay, ...]

    def __post_init__(self) -> None:
        if not self.days:
            raise WeatherError("empty weather series")
        prev = None
        for day in self.days:
            day.validate()
            if prev is not None:
                delta = (day.date - prev).days
                if delta <= 0:
                    raise DateOrderError(f"dates not increasing at {day.date}")
                if delta > 1:
                    raise DateGapError(f"missing date {prev + timedelta(days=1)}")
            prev = day.date

    @property
    def start(self) -> Date:
        return self.days[0].date

    @property
    def end(self) -> Date:
        return self.days[-1].date

    def day_at(self, date: Date) -> WeatherDay:
        idx = (date - self.start).days
        if idx < 0 or idx >= len(self.days):
            raise WeatherError(f"date {date} outside series [{self.start}, {self.end}]")
        return self.days[idx]

    def slice(self, start: Date, end: Date) -> "WeatherSeries":
        """Sub-series covering [start, end] inclusive; errors if not covered."""
        if start < self.start or end > self.end:
            raise WeatherError(
                f"requested [{start}, {end}] not covered by series "
                f"[{self.start}, {self.end}]"
            )
        i = (start - self.start).days
        j = (end - self.start).days + 1
        return WeatherSeries(self.latitude, self.longitude, self.days[i:j])


_COLUMNS = ("date", "t_min", "t_max", "t_avg", "irradiation", "rainfall",
            "wind", "vapor_pressure")


def load_weather_table(path: str | Path) -> WeatherSeries:
    """Load a weather CSV.

    Layout: two metadata lines (``# latitude: <deg>``, ``# longitude: <deg>``),
    a header row, then one row per day. ``t_avg`` may be omitted, in which
    case it is filled as (t_min + t_max) / 2.
    """
    path = Path(path)
    if not path.exists():
        raise WeatherFileError(f"weather file not found: {path}")
    with path.open(newline="") as fh:
        meta: dict[str, float] = {}
        for _ in range(2):
            line = fh.readline().strip()
            if not line.startswith("#") or ":" not in line:
                raise WeatherFileError(f"{path}: expected '# key: value' preamble, got {line!r}")
            key, _, value = line.lstrip("# ").partition(":")
            meta[key.strip()] = float(value)
        if "latitude" not in meta or "longitude" not in meta:
            raise WeatherFileError(f"{path}: preamble must define latitude and longitude")
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or ()
        required = [c for c in _COLUMNS if c != "t_avg"]
        missing = [c for c in required if c not in fields]
        if missing:
            raise WeatherFileError(f"{path}: missing columns {missing}")
        has_t_avg = "t_avg" in fields
        days = []
        for row in reader:
            t_min = float(row["t_min"])
            t_max = float(row["t_max"])
            t_avg = float(row["t_avg"]) if has_t_avg and row["t_avg"] != "" \
                else (t_min + t_max) / 2.0
            days.append(WeatherDay(
                date=Date.fromisoformat(row["date"]),
                t_min=t_min, t_max=t_max, t_avg=t_avg,
                irradiation=float(row["irradiation"]),
                rainfall=float(row["rainfall"]),
                wind=float(row["wind"]),
                vapor_pressure=float(row["vapor_pressure"]),
            ))
    return WeatherSeries(meta["latitude"], meta["longitude"], tuple(days))


def dump_weather_table(series: WeatherSeries, path: str | Path) -> Path:
    """Write a series in the layout read by ``load_weather_table``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# latitude: {series.latitude!r}\n")
        fh.write(f"# longitude: {series.longitude!r}\n")
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for d in series.days:
            writer.writerow([d.date.isoformat(), repr(d.t_min), repr(d.t_max),
                             repr(d.t_avg), repr(d.irradiation), repr(d.rainfall),
                             repr(d.wind), repr(d.vapor_pressure)])
    return path


def _synth_rng(seed: int, latitude: float, year: int) -> np.random.Generator:
    lat_key = int(round((latitude + 90.0) * 1e6))
    return np.random.default_rng([int(seed), lat_key, int(year)])


def synth_weather(seed: int, latitude: float, year: int) -> WeatherSeries:
    """Deterministic synthetic weather for one calendar year.

    Sinusoidal annual temperature cycle (phase flipped in the southern
    hemisphere) with seeded uniform noise; rainfall is a seeded
    Bernoulli(0.3) wet-day indicator times an exponential-like tail.
    Bit-identical for identical (seed, latitude, year).
    """
    if abs(latitude) > MAX_LATITUDE:
        raise WeatherError(f"|latitude| must be <= {MAX_LATITUDE}, got {latitude}")
    rng = _synth_rng(seed, latitude, year)
    start = Date(year, 1, 1)
    n_days = (Date(year, 12, 31) - start).days + 1
    hemi = 1.0 if latitude >= 0 else -1.0
    days = []
    for d in range(n_days):
        date = start + timedelta(days=d)
        doy = d + 1
        season = -math.cos(2.0 * math.pi * (doy - SYNTH_T_PHASE_DAY) / 365.0) * hemi
        t_avg = SYNTH_T_MEAN + SYNTH_T_AMPL * season + rng.uniform(-SYNTH_T_NOISE, SYNTH_T_NOISE)
        t_min = t_avg - rng.uniform(2.0, 6.0)
        t_max = t_avg + rng.uniform(2.0, 6.0)
        irr = max(0.5, 13.0 + 9.0 * season + rng.uniform(-3.0, 3.0))
        wet = rng.uniform() < SYNTH_RAIN_PROB
        rain = -SYNTH_RAIN_SCALE * math.log(1.0 - rng.uniform()) if wet else 0.0
        wind = rng.uniform(0.5, 6.0)
        vap = max(1.0, 6.0 + 0.4 * max(t_avg, 0.0) + rng.uniform(0.0, 2.0))
        days.append(WeatherDay(date, t_min, t_max, t_avg, irr, rain, wind, vap))
    return WeatherSeries(latitude, 0.0, tuple(days))


def synth_weather_span(seed: int, latitude: float, first_year: int,
                       last_year: int) -> WeatherSeries:
    """Concatenate per-year synthetic series over [first_year, last_year]."""
    days: list[WeatherDay] = []
    for year in range(first_year, last_year + 1):
        days.extend(synth_weather(seed, latitude, year).days)
    return WeatherSeries(latitude, 0.0, tuple(days))


def day_length(latitude: float, day_of_year: int) -> float:
    """Astronomical day length in hours.

    Declination delta = -23.44 deg * cos(2*pi*(d+10)/365); day length is
    (24/pi)*acos(clamp(-tan(phi)*tan(delta), -1, 1)).
    """
    if abs(latitude) > MAX_LATITUDE:
        raise WeatherError(f"|latitude| must be <= {MAX_LATITUDE}, got {latitude}")
    decl = -23.44 * math.cos(2.0 * math.pi * (day_of_year + 10) / 365.0)
    x = -math.tan(math.radians(latitude)) * math.tan(math.radians(decl))
    x = min(1.0, max(-1.0, x))
    return (24.0 / math.pi) * math.acos(x)
