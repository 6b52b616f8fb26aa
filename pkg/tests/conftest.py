import pytest

from scalefit.mup import enumerate_grid
from scalefit.synth import gen_surface, reference_oracle


@pytest.fixture(scope="session")
def clean_surface():
    """Noiseless reference sweep, 1836 records. Shared because it is immutable."""
    return gen_surface(reference_oracle(), enumerate_grid())


@pytest.fixture(scope="session")
def clean_surface_csv(clean_surface, tmp_path_factory):
    from scalefit.run_store import emit_csv

    path = tmp_path_factory.mktemp("data") / "runs.csv"
    path.write_text(emit_csv(clean_surface), encoding="utf-8")
    return path
