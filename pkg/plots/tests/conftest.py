import pytest

pytest.importorskip(
    "driven_ising_plots",
    reason="figure-script tests need the plots package: pip install -e plots",
)
