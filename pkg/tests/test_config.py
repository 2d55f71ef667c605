import yaml
import pytest

from cropsim import config
from cropsim.config import (ValidationError, dump_run_config, list_crops,
                            list_sites, load_agro_config, load_crop, load_site)
from cropsim.engine import run_episode
from cropsim.policies import builtin_policy

AGRO_DOC = {
    "crop_name": "wheat", "crop_variety": "default",
    "site_name": "loam", "site_variation": "default",
    "latitude": 46.3, "longitude": -119.3, "year": 2020,
    "sow_date": "03-15", "max_duration_days": 120, "n_seasons": 1,
    "weather_source": "synthetic", "limitation_mode": "lnpkw",
    "step_interval_days": 1, "random_seed": 42,
}


def _write(tmp_path, doc, name="agro.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def test_load_valid_file(tmp_path):
    bundle = load_agro_config(_write(tmp_path, AGRO_DOC))
    assert bundle.agro.crop_name == "wheat"
    assert bundle.agro.year == 2020
    assert bundle.crop.name == "wheat"
    assert bundle.site.name == "loam"


def test_missing_key_error_names_it(tmp_path):
    doc = dict(AGRO_DOC)
    del doc["sow_date"]
    with pytest.raises(ValidationError, match="sow_date"):
        load_agro_config(_write(tmp_path, doc))


def test_extra_key_rejected(tmp_path):
    doc = dict(AGRO_DOC, bonus=1)
    with pytest.raises(ValidationError, match="bonus"):
        load_agro_config(_write(tmp_path, doc))


def test_crop_override_changes_only_that_parameter(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    base = load_agro_config(path)
    mod = load_agro_config(path, ["crop.TBASE=3.5"])
    assert mod.crop.phenology.tbase == 3.5
    # everything else identical
    assert mod.crop == base.crop.with_param("TBASE", 3.5)
    assert mod.site == base.site
    assert mod.agro == base.agro


def test_ag_override_swaps_crop(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    mod = load_agro_config(path, ["ag.crop_name=jujube"])
    assert mod.crop.name == "jujube"
    assert mod.crop.perennial


def test_unknown_override_path(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    with pytest.raises(ValidationError, match="NOPE"):
        load_agro_config(path, ["crop.NOPE=1"])
    with pytest.raises(ValidationError, match="ag"):
        load_agro_config(path, ["weird.key=1"])


def test_type_mismatch(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    with pytest.raises(ValidationError):
        load_agro_config(path, ["crop.TSUM1=hello"])
    with pytest.raises(ValidationError):
        load_agro_config(path, ["ag.year=2020.5"])


def test_invariant_violation_after_override(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    with pytest.raises(ValidationError):
        load_agro_config(path, ["crop.TSUM1=-5"])


def test_unknown_crop_lists_available(tmp_path):
    doc = dict(AGRO_DOC, crop_name="kale")
    with pytest.raises(ValidationError, match="grape"):
        load_agro_config(_write(tmp_path, doc))


def test_unknown_variety_lists_available():
    with pytest.raises(ValidationError, match="default"):
        load_crop("wheat", "sparkling")


def test_unknown_site_variation():
    with pytest.raises(ValidationError, match="variation"):
        load_site("loam", "lunar")


def test_limitation_mode_closed_set(tmp_path):
    doc = dict(AGRO_DOC, limitation_mode="extreme")
    with pytest.raises(ValidationError):
        load_agro_config(_write(tmp_path, doc))


def test_snapshot_round_trip(tmp_path):
    bundle = load_agro_config(_write(tmp_path, AGRO_DOC), ["crop.TSUM1=950"])
    snap = dump_run_config(bundle, tmp_path / "out")
    again = load_agro_config(snap)
    assert again.agro == bundle.agro
    assert again.crop == bundle.crop
    assert again.site == bundle.site


def test_snapshot_replays_identically(tmp_path):
    bundle = load_agro_config(_write(tmp_path, AGRO_DOC))
    snap = dump_run_config(bundle, tmp_path / "out")
    again = load_agro_config(snap)
    pol = builtin_policy("biweekly_NW")
    log_a = run_episode(bundle, pol)
    log_b = run_episode(again, pol)
    assert log_a.records == log_b.records


def test_override_idempotence(tmp_path):
    path = _write(tmp_path, AGRO_DOC)
    once = load_agro_config(path, ["crop.TBASE=3.0"])
    twice = load_agro_config(path, ["crop.TBASE=3.0", "crop.TBASE=3.0"])
    assert once.crop == twice.crop


def test_variety_overlay():
    base = load_crop("wheat", "default")
    winter = load_crop("wheat", "winter")
    assert winter.phenology.tsum1 == 1100.0
    assert winter.phenology.tbase == 0.0
    assert winter.canopy == base.canopy


def test_list_crops_and_all_load():
    crops = list_crops()
    assert "grape" in crops
    for name, varieties in crops.items():
        for variety in varieties:
            load_crop(name, variety).validate()
    for name, variations in list_sites().items():
        for variation in variations:
            load_site(name, variation).validate()


def test_all_bundled_agro_configs_load():
    for name in ("wheat", "maize_bench", "potato", "sunflower", "jujube", "grape"):
        bundle = load_agro_config(config.bundled_agro_path(name))
        bundle.validate()


def test_weather_file_source(tmp_path):
    from cropsim.weather import dump_weather_table, synth_weather_span
    series = synth_weather_span(1, 46.3, 2020, 2021)
    wpath = tmp_path / "weather.csv"
    dump_weather_table(series, wpath)
    doc = dict(AGRO_DOC, weather_source="weather.csv")
    bundle = load_agro_config(_write(tmp_path, doc))
    assert bundle.weather().day_at(bundle.agro.start_date()) is not None
    # file too short for the horizon
    doc = dict(AGRO_DOC, weather_source="weather.csv", year=2021,
               max_duration_days=365)
    with pytest.raises(ValidationError, match="covers"):
        load_agro_config(_write(tmp_path, doc)).weather()
