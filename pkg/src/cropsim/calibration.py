"""Stage-wise Bayesian optimization of grape phenology parameters.

The loss for stage k is the standard onset RMSE coupled with the
previous stage: sqrt(mean((P_k - O_k)^2) + mean((P_{k-1} - O_{k-1})^2)),
with the coupling term dropped for Bud Break. Stages are optimized in order
Bud Break -> Bloom -> Veraison, freezing earlier fits. The optimizer is a
from-scratch Gaussian process (RBF kernel, fixed hyperparameters) with the
expected-improvement acquisition maximized over a seeded candidate pool.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import qmc

from .phenology import (ForcingCurve, PhenologyParams, Stage, UNREACHED_DOY,
                        forcing_curves)
from .weather import WeatherSeries, load_weather_table, synth_weather

STAGES = (Stage.BUDBREAK, Stage.BLOOM, Stage.VERAISON)

#: Parameter subsets optimized per stage; earlier stages stay frozen.
STAGE_PARAM_NAMES: dict[Stage, tuple[str, ...]] = {
    Stage.BUDBREAK: ("TBASE", "CHILL_REQ", "DLCRIT", "TCHILL_MAX", "FORCE_BB"),
    Stage.BLOOM: ("FORCE_BL",),
    Stage.VERAISON: ("FORCE_VE",),
}

_PARAM_ATTRS = {
    "TBASE": "tbase", "CHILL_REQ": "chill_req", "DLCRIT": "dlcrit",
    "TCHILL_MAX": "tchill_max", "FORCE_BB": "force_bb",
    "FORCE_BL": "force_bl", "FORCE_VE": "force_ve",
}

_FORCE_ATTR = {Stage.BUDBREAK: "force_bb", Stage.BLOOM: "force_bl",
               Stage.VERAISON: "force_ve"}


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class YearRecord:
    year: int
    weather: WeatherSeries
    observed: dict[Stage, int]  # missing stages simply absent


@dataclass(frozen=True)
class PhenologyDataset:
    cultivar: str
    records: tuple[YearRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise CalibrationError("dataset needs at least one year")
        for rec in self.records:
            doys = [rec.observed[s] for s in STAGES if s in rec.observed]
            if any(not 1 <= d <= UNREACHED_DOY for d in doys):
                raise CalibrationError(f"{rec.year}: observed DOY outside 1..366")
            if doys != sorted(doys):
                raise CalibrationError(f"{rec.year}: observations not stage-ordered")


def load_phenology_dataset(path: str | Path) -> PhenologyDataset:
    """CSV columns: cultivar, year, weather_file, doy_budbreak, doy_bloom,
    doy_veraison (blank = missing). weather_file is a path relative to the
    CSV or a ``synthetic:<seed>:<latitude>`` spec."""
    path = Path(path)
    records = []
    cultivar = ""
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            cultivar = row["cultivar"]
            year = int(row["year"])
            records.append(YearRecord(
                year=year,
                weather=_resolve_weather(row["weather_file"], path.parent, year),
                observed={stage: int(row[col]) for stage, col in
                          ((Stage.BUDBREAK, "doy_budbreak"),
                           (Stage.BLOOM, "doy_bloom"),
                           (Stage.VERAISON, "doy_veraison"))
                          if row[col].strip() != ""},
            ))
    return PhenologyDataset(cultivar=cultivar, records=tuple(records))


def _resolve_weather(spec: str, base_dir: Path, year: int) -> WeatherSeries:
    if spec.startswith("synthetic:"):
        _, seed, lat = spec.split(":")
        return synth_weather(int(seed), float(lat), year)
    p = Path(spec)
    return load_weather_table(p if p.is_absolute() else base_dir / p)


# --------------------------------------------------------------------------
# Gaussian process with an RBF kernel and fixed hyperparameters.

@dataclass(frozen=True)
class GPHyper:
    lengthscale: float = 0.2  # in the [0,1]-normalized input space
    signal_var: float | None = None  # None -> sample variance of targets
    noise: float = 1e-6


JITTER = 1e-8


@dataclass(frozen=True)
class GPosterior:
    x: np.ndarray  # (n, d), normalized inputs
    y: np.ndarray  # (n,)
    mean: float
    signal_var: float
    lengthscale: float
    noise: float
    chol: np.ndarray  # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray  # solve(K + .., y - mean)


def _rbf(signal_var: float, lengthscale: float, a: np.ndarray,
         b: np.ndarray) -> np.ndarray:
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] \
        - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return signal_var * np.exp(-d2 / (2.0 * lengthscale ** 2))


def gp_fit(x: np.ndarray, y: np.ndarray, hyper: GPHyper | None = None) -> GPosterior:
    """Exact GP regression posterior on normalized inputs."""
    hyper = hyper or GPHyper()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 1:
        raise CalibrationError("gp_fit needs at least one observation")
    if not np.all(np.isfinite(y)):
        raise CalibrationError("gp_fit targets must be finite")
    mean = float(np.mean(y))
    signal_var = hyper.signal_var
    if signal_var is None:
        signal_var = float(np.var(y))
    signal_var = max(signal_var, 1e-12)
    k = _rbf(signal_var, hyper.lengthscale, x, x)
    k[np.diag_indices_from(k)] += hyper.noise + JITTER
    chol = np.linalg.cholesky(k)
    alpha = cho_solve((chol, True), y - mean)
    return GPosterior(x=x, y=y, mean=mean, signal_var=signal_var,
                      lengthscale=hyper.lengthscale, noise=hyper.noise,
                      chol=chol, alpha=alpha)


def gp_predict(gp: GPosterior, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at query points (m, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k_star = _rbf(gp.signal_var, gp.lengthscale, gp.x, x)  # (n, m)
    mu = gp.mean + k_star.T @ gp.alpha
    v = solve_triangular(gp.chol, k_star, lower=True)
    var = gp.signal_var - np.sum(v * v, axis=0)
    np.maximum(var, 0.0, out=var)
    return mu, np.sqrt(var)


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def ei_values(mu, sigma, best: float) -> np.ndarray:
    """Closed-form EI for minimization.

    z = (best - mu) / sigma; EI = (best - mu) * Phi(z) + sigma * phi(z),
    degenerating to max(best - mu, 0) where sigma = 0.
    """
    from scipy.special import erf

    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    improve = best - mu
    ei = np.maximum(improve, 0.0)
    pos = sigma > 0.0
    if np.any(pos):
        z = improve[pos] / sigma[pos]
        cdf = 0.5 * (1.0 + erf(z / _SQRT2))
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        ei = ei.copy()
        ei[pos] = improve[pos] * cdf + sigma[pos] * pdf
    return np.maximum(ei, 0.0)


def expected_improvement(gp: GPosterior, x: np.ndarray, best: float) -> float:
    """EI of a single candidate under a fitted posterior."""
    mu, sigma = gp_predict(gp, np.atleast_2d(x))
    return float(ei_values(mu, sigma, best)[0])


# --------------------------------------------------------------------------
# Bayesian optimization loop.

N_INITIAL = 10
N_CANDIDATES = 1024
N_LOCAL = 128
LOCAL_SCALE = 0.05  # half-width of the incumbent neighborhood (normalized)


@dataclass
class BOResult:
    x: np.ndarray  # best point, original units
    fun: float
    trace: list[float]  # best-so-far after every evaluation
    n_evals: int
    xs: np.ndarray  # all evaluated points, original units
    ys: np.ndarray


def bo_minimize(loss, bounds, iters: int = 500, seed: int = 0,
                hyper: GPHyper | None = None) -> BOResult:
    """Minimize a black-box loss over a box.

    Ten seeded quasi-uniform points initialize the surrogate; every
    iteration refits the GP on all evaluations and evaluates the loss at
    the EI-argmax over 1024 seeded uniform candidates plus a sample around
    the incumbent. Non-finite losses are recorded as +inf and imputed for
    the surrogate. Deterministic per seed.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or not np.all(np.isfinite(bounds)):
        raise CalibrationError("bounds must be a finite (d, 2) array")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi <= lo):
        raise CalibrationError("each bound must satisfy lo < hi")
    d = len(bounds)
    ss = np.random.SeedSequence(seed)
    init_seed, cand_seed = ss.spawn(2)
    rng = np.random.default_rng(cand_seed)

    def denorm(u: np.ndarray) -> np.ndarray:
        return lo + u * (hi - lo)

    def evaluate(u: np.ndarray) -> float:
        value = float(loss(denorm(u)))
        return value if math.isfinite(value) else math.inf

    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(init_seed))
    xs = [u for u in sampler.random(N_INITIAL)]
    ys = [evaluate(u) for u in xs]
    trace: list[float] = []
    best = math.inf
    for v in ys:
        best = min(best, v)
        trace.append(best)

    for _ in range(iters):
        x_arr = np.array(xs)
        y_arr = np.array(ys)
        finite = np.isfinite(y_arr)
        if np.any(finite):
            worst = float(np.max(y_arr[finite]))
            spread = float(np.ptp(y_arr[finite])) or 1.0
            y_fit = np.where(finite, y_arr, worst + spread)
        else:
            y_fit = np.zeros_like(y_arr)
        gp = gp_fit(x_arr, y_fit, hyper)
        candidates = rng.uniform(size=(N_CANDIDATES, d))
        incumbent = x_arr[int(np.argmin(y_fit))]
        local = incumbent + rng.uniform(-LOCAL_SCALE, LOCAL_SCALE, size=(N_LOCAL, d))
        pool = np.clip(np.vstack([candidates, local]), 0.0, 1.0)
        mu, sigma = gp_predict(gp, pool)
        ei = ei_values(mu, sigma, float(np.min(y_fit)))
        u = pool[int(np.argmax(ei))]
        xs.append(u)
        value = evaluate(u)
        ys.append(value)
        best = min(best, value)
        trace.append(best)

    y_arr = np.array(ys)
    idx = int(np.argmin(y_arr))
    xs_arr = np.array(xs)
    return BOResult(x=denorm(xs_arr[idx]), fun=float(y_arr[idx]), trace=trace,
                    n_evals=len(ys), xs=denorm(xs_arr), ys=y_arr)


# --------------------------------------------------------------------------
# Phenology loss and the stage-wise calibration driver.

def apply_params(base: PhenologyParams, names, values) -> PhenologyParams:
    changes = {_PARAM_ATTRS[name]: float(v) for name, v in zip(names, values)}
    return replace(base, **changes)


def _onsets_by_year(params: PhenologyParams,
                    curves_per_year: dict[int, ForcingCurve]) -> dict[int, dict[Stage, int]]:
    return {
        year: {stage: curve.onset(getattr(params, _FORCE_ATTR[stage]))
               for stage in STAGES}
        for year, curve in curves_per_year.items()
    }


class _CurveCache:
    """Forcing curves keyed by the threshold-free parameter tuple.

    The daily thermal-time trajectory ignores the FORCE_* thresholds, so
    threshold-only candidates (the Bloom and Veraison stages) reuse one
    simulation per dataset year.
    """

    def __init__(self, dataset: PhenologyDataset, maxsize: int = 8):
        self._dataset = dataset
        self._cache: dict[tuple, dict[int, ForcingCurve]] = {}
        self._maxsize = maxsize

    def curves(self, params: PhenologyParams) -> dict[int, ForcingCurve]:
        key = (params.tbase, params.chill_req, params.dlcrit, params.tchill_max,
               params.tsum1, params.tsum2, params.dorm_min, params.stag_max,
               params.trelease)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out: dict[int, ForcingCurve] = {}
        for rec in self._dataset.records:
            curve = forcing_curves(params, rec.weather)
            for c in curve:
                if c.year == rec.year:
                    out[rec.year] = c
        if len(self._cache) >= self._maxsize:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = out
        return out


def _stage_years(dataset: PhenologyDataset, stage: Stage) -> list[YearRecord]:
    needed = [stage] if stage is Stage.BUDBREAK else [stage, STAGES[STAGES.index(stage) - 1]]
    return [rec for rec in dataset.records
            if all(s in rec.observed for s in needed)]


def rmse_loss(theta_k, dataset: PhenologyDataset, stage: Stage,
              frozen: PhenologyParams, _cache: _CurveCache | None = None) -> float:
    """Coupled onset RMSE for one stage (days).

    theta_k maps the stage's parameter names (or a value vector in catalog
    order) onto the frozen parameter set. Years missing an observation for
    the stage pair are skipped; a stage the model never reaches predicts the
    sentinel 366.
    """
    names = STAGE_PARAM_NAMES[stage]
    if isinstance(theta_k, dict):
        params = apply_params(frozen, theta_k.keys(), theta_k.values())
    else:
        params = apply_params(frozen, names, theta_k)
    usable = _stage_years(dataset, stage)
    if not usable:
        raise CalibrationError(f"no usable years for stage {stage.name}")
    cache = _cache or _CurveCache(dataset)
    curves = cache.curves(params)
    prev = None if stage is Stage.BUDBREAK else STAGES[STAGES.index(stage) - 1]
    force = getattr(params, _FORCE_ATTR[stage])
    force_prev = getattr(params, _FORCE_ATTR[prev]) if prev is not None else 0.0
    n = len(usable)
    total = 0.0
    for rec in usable:
        curve = curves[rec.year]
        err = curve.onset(force) - rec.observed[stage]
        total += err * err / n
        if prev is not None:
            err_prev = curve.onset(force_prev) - rec.observed[prev]
            total += err_prev * err_prev / n
    return math.sqrt(total)


def stage_rmse(params: PhenologyParams, dataset: PhenologyDataset,
               stage: Stage) -> float:
    """Single-stage onset RMSE of a parameter set (no coupling term)."""
    usable = [rec for rec in dataset.records if stage in rec.observed]
    if not usable:
        return math.nan
    curves = _CurveCache(dataset).curves(params)
    force = getattr(params, _FORCE_ATTR[stage])
    total = 0.0
    for rec in usable:
        err = curves[rec.year].onset(force) - rec.observed[stage]
        total += err * err
    return math.sqrt(total / len(usable))


@dataclass
class CalibrationResult:
    cultivar: str
    theta: dict[str, float]  # all seven parameters, calibrated values
    stage_values: dict[str, dict[str, float]]  # per-stage fitted subsets
    stage_rmse: dict[str, float]  # per-stage onset RMSE, days
    n_evals: int
    traces: dict[str, list[float]]  # per-stage best-so-far

    def to_document(self) -> dict:
        return {
            "cultivar": self.cultivar,
            "theta": self.theta,
            "stages": self.stage_values,
            "rmse_days": self.stage_rmse,
            "evaluations": self.n_evals,
        }


def calibrate_cultivar(dataset: PhenologyDataset, bounds: dict[str, tuple[float, float]],
                       seed: int = 0, iters: int = 500,
                       base: PhenologyParams | None = None) -> CalibrationResult:
    """Three BO runs in stage order, each freezing the earlier fits."""
    missing = sorted({n for names in STAGE_PARAM_NAMES.values() for n in names}
                     - set(bounds))
    if missing:
        raise CalibrationError(f"bounds missing parameters: {missing}")
    params = base if base is not None else _default_grape_base()
    cache = _CurveCache(dataset)
    ss = np.random.SeedSequence(seed)
    stage_seeds = ss.spawn(len(STAGES))
    stage_values: dict[str, dict[str, float]] = {}
    traces: dict[str, list[float]] = {}
    n_evals = 0
    for stage, stage_seed in zip(STAGES, stage_seeds):
        names = STAGE_PARAM_NAMES[stage]
        frozen = params

        def loss(vec, _stage=stage, _frozen=frozen):
            return rmse_loss(vec, dataset, _stage, _frozen, _cache=cache)

        result = bo_minimize(loss, [bounds[n] for n in names], iters=iters,
                             seed=int(stage_seed.generate_state(1)[0]))
        params = apply_params(params, names, result.x)
        stage_values[stage.name] = {n: float(v) for n, v in zip(names, result.x)}
        traces[stage.name] = result.trace
        n_evals += result.n_evals
    theta = {name: float(getattr(params, attr)) for name, attr in _PARAM_ATTRS.items()}
    rmse = {stage.name: float(stage_rmse(params, dataset, stage)) for stage in STAGES}
    return CalibrationResult(cultivar=dataset.cultivar, theta=theta,
                             stage_values=stage_values, stage_rmse=rmse,
                             n_evals=n_evals, traces=traces)


def _default_grape_base() -> PhenologyParams:
    from .config import load_crop
    return load_crop("grape").phenology
