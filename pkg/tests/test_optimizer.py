import numpy as np
import pytest

from omegaturn.chain import ChainGeometry, FeasibilitySpec
from omegaturn.designs import frozen_design
from omegaturn.drag import FrictionModel
from omegaturn.gaits import TwoWaveDesign
from omegaturn.optimizer import NoFeasibleStart, OptimizerConfig, objective, optimize
from omegaturn.simulate import angular_displacement, integrate_gait

GEOM = ChainGeometry()
MODEL = FrictionModel()
SMALL = OptimizerConfig(grid_values=3, phase_samples=60, steps_per_cycle=100, max_outer=2, top_k=1,
                        refine_levels=1, tau_cells=16, amp_cells=9)


def test_objective_is_simulated_rotation():
    d = frozen_design(8, 1.0)
    want = angular_displacement(integrate_gait(d, GEOM, MODEL, 100, 1))
    assert objective(d, GEOM, MODEL, steps_per_cycle=100) == pytest.approx(want)


def test_objective_is_minus_inf_for_infeasible():
    d = TwoWaveDesign.from_params(a_f=1.2, gamma=1.0, a_o=0.5, k_o=0.0)
    assert objective(d, GEOM, MODEL, FeasibilitySpec(np.radians(30.0))) == float("-inf")


def test_small_run_improves_monotonically():
    start = TwoWaveDesign.from_params(a_f=0.5, gamma=1.0, a_o=0.3, k_o=1.0)
    rep = optimize(start, SMALL, GEOM, MODEL)
    assert np.all(np.diff(rep.trace) >= 0)
    assert rep.objective >= rep.trace[0] and rep.objective > 0
    assert rep.certificate["feasible"]
    assert rep.objective == pytest.approx(objective(rep.best, GEOM, MODEL, steps_per_cycle=100))
    # rerun is deterministic
    again = optimize(start, SMALL, GEOM, MODEL)
    assert again.to_json() == rep.to_json()


def test_no_feasible_start():
    start = TwoWaveDesign.from_params(a_f=1.5, gamma=1.0, a_o=0.3, theta_max=np.radians(5.0))
    with pytest.raises(NoFeasibleStart):
        optimize(start, SMALL, GEOM, MODEL)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(tol=0)
    with pytest.raises(ValueError):
        OptimizerConfig(grid_values=2)
    with pytest.raises(ValueError):
        OptimizerConfig(bounds={"a_f": (1.0, 0.0)})
