"""Reference data shipped with the package and the standard six-portfolio setup."""

from __future__ import annotations

from importlib import resources

from .identifiability import AvailabilityMask
from .model import CORPORATE
from .simulator import ExplicitPath, SimulationSpec

#: TTC PDs of the six illustrative sub-portfolios
PAPER_TTC_PDS = (0.005, 0.017, 0.034, 0.056, 0.07, 0.09)
PAPER_HORIZON = 20


def _data_text(name):
    return resources.files("ttcpd").joinpath("data").joinpath(name).read_text()


def reference_factor_path():
    """Stored 20-year factor path: good start, recession mid-cycle, boom at the end."""
    from .io import parse_factor_path

    return parse_factor_path(_data_text("reference_factor_path.csv"), "reference_factor_path.csv")


def paper_fig4_mask() -> AvailabilityMask:
    """Six-portfolio availability pattern with no complete row and overlapping coverage."""
    from .io import parse_mask

    return parse_mask(_data_text("paper_fig4.mask"), "paper_fig4.mask")


def paper_setup(n_obligors=100_000, seed=0, masked=False, mask=None) -> SimulationSpec:
    """Six corporate sub-portfolios over 20 years on the reference factor path.

    ``masked=True`` applies :func:`paper_fig4_mask`; an explicit ``mask`` wins.
    """
    if mask is None and masked:
        mask = paper_fig4_mask()
    return SimulationSpec(
        true_ttc_pds=PAPER_TTC_PDS,
        horizon=PAPER_HORIZON,
        factor_spec=ExplicitPath(reference_factor_path()),
        n_obligors=n_obligors,
        asset_class=CORPORATE,
        mask=None if mask is None else getattr(mask, "grid", mask),
        seed=seed,
    )
