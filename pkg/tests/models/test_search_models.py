"""
Tests para la configuración de búsqueda y los resultados de construcción.
"""
import numpy as np
import pytest

from app.models.criteria import CriterionComponents, CriterionValue
from app.models.errors import ModelSpecError
from app.models.search import ConstructionResult, SearchConfig, StratumDesign, StratumReport
from app.models.structure import Stratum


@pytest.mark.unit
def test_search_config_validation():
    assert SearchConfig().policy == "best"
    with pytest.raises(ValueError):
        SearchConfig(n_starts=0)
    with pytest.raises(ValueError):
        SearchConfig(policy="random")
    with pytest.raises(ValueError):
        SearchConfig(max_passes=0)
    with pytest.raises(ValueError):
        SearchConfig(tolerance=-1.0)


@pytest.mark.unit
def test_stratum_design_points():
    stratum = Stratum("Days.Periods", ("Days", "Periods"), 4, 1, "Days.Periods")
    design = StratumDesign(
        levels=np.array([[1.0], [0.0], [-1.0], [1.0]]),
        factor_names=("X2",),
        inherited=np.array([[1.0], [1.0], [-1.0], [-1.0]]),
        inherited_names=("X1",),
        stratum=stratum,
    )
    assert design.m == 4
    assert design.point_names == ("X1", "X2")
    assert np.array_equal(design.points[:, 0], [1.0, 1.0, -1.0, -1.0])
    with pytest.raises(ModelSpecError):
        StratumDesign(np.zeros((3, 1)), ("X2",), np.zeros((4, 1)), ("X1",), stratum)


@pytest.mark.unit
def test_construction_result_report_rows():
    value = CriterionValue(value=0.5, log_value=np.log(0.5), singular=False, d=4, logdet=-1.0, trace=3.0)
    report = StratumReport(
        stratum="Days",
        m=26,
        p=3,
        scheme="CRD(m=26)",
        value=value,
        components=CriterionComponents(d_value=0.7, a_value=3.0, pure_error_df=4, lack_of_fit_df=1),
        trajectory=(0.1, 0.4, 0.5),
    )
    result = ConstructionResult(
        design=np.zeros((26, 1)), factor_names=("X1",), reports=(report,), start_index=3, seed=7, n_starts=5
    )
    assert result.final_value is value
    row = result.report_rows()[0]
    assert row["pure_error_df"] == 4
    assert row["lack_of_fit_df"] == 1
    assert row["passes"] == 2
    assert row["interchange_before"] is None
