import pytest

from cropsim import config


@pytest.fixture(scope="session")
def wheat_bundle():
    return config.load_agro_config(config.bundled_agro_path("wheat"))


@pytest.fixture(scope="session")
def bench_bundle():
    return config.load_agro_config(config.bundled_agro_path("maize_bench"))


@pytest.fixture(scope="session")
def potato_bundle():
    return config.load_agro_config(config.bundled_agro_path("potato"))


@pytest.fixture(scope="session")
def sunflower_bundle():
    return config.load_agro_config(config.bundled_agro_path("sunflower"))


@pytest.fixture(scope="session")
def jujube_bundle():
    return config.load_agro_config(config.bundled_agro_path("jujube"))


@pytest.fixture(scope="session")
def grape_crop():
    return config.load_crop("grape")
