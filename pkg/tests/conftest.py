import numpy as np
import pytest

from helpers import synthetic_market, synthetic_panels


@pytest.fixture(scope="session")
def synth_data():
    data, truth = synthetic_market()
    return data, truth


@pytest.fixture(scope="session")
def synth_csv_paths(tmp_path_factory):
    """Factor and portfolio CSVs on disk, with a banner, one missing cell,
    and one injected spike, so the pipeline exercises cleaning."""
    from factorcast.data_ingest import serialize_panel

    factors, portfolios, _ = synthetic_panels(seed=11)
    factors.columns["SMB"][40] = np.nan
    factors.missing["SMB"][40] = True
    portfolios.columns["Manuf"][100] += 60.0  # far outside any monthly move

    root = tmp_path_factory.mktemp("csvs")
    factors_path = root / "factors.csv"
    portfolios_path = root / "portfolios.csv"
    factors_path.write_text(
        "Synthetic factor returns for testing\n   (percent per month)\n\n"
        + serialize_panel(factors)
    )
    portfolios_path.write_text(
        "Synthetic industry portfolios\n\n" + serialize_panel(portfolios)
    )
    return factors_path, portfolios_path
