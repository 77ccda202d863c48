import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualproj.geometry import ContractError
from dualproj.reward import (TERMS, RewardWeights, auxiliary_rewards, desired_radius, radius_adaptive_reward,
                             radius_regularization, radius_smoothness, rest_state, step_terms, total_reward,
                             tracking_reward)

TABLE = {
    "lin_vel_tracking": 2.0, "ang_vel_tracking": 0.5, "orientation": -1.0, "ang_vel_xy": -0.3, "hip": -1.0,
    "dof_vel": -1e-3, "dof_acc": -2.5e-7, "action_rate": -0.01, "energy": -2.5e-7, "collision": -3.0,
    "penetrate": -1.0, "dof_limits": -5.0, "alive": 0.15, "air_time": 5.0, "radius_adaptive": 1.0,
    "radius_smoothness": -0.1, "radius_regularization": -0.1,
}


def test_default_weights():
    w = RewardWeights()
    assert {t: getattr(w, t) for t in TERMS} == TABLE
    assert RewardWeights.from_dict({"alive": 0.2}).alive == 0.2
    with pytest.raises(ContractError):
        RewardWeights.from_dict({"speed": 1})


def test_tracking():
    assert tracking_reward([1, 0, 0], 0.3, [1, 0, 0.3]) == (1.0, 1.0)
    lin, ang = tracking_reward([2, 0, 0], 0.0, [1, 0, 0])
    assert lin == math.exp(-1) and ang == 1.0
    lin, ang = tracking_reward([0, 0, 0], 0.0, [0, 0, 0])
    assert total_reward({"lin_vel_tracking": lin, "ang_vel_tracking": ang}).total == 2.5


@pytest.mark.parametrize("v,d,r", [(1.5, 10.0, 5.0), (1.5, 1.2, 1.2), (0.0, 10.0, 1.0), (0.75, 10.0, 3.0)])
def test_desired_radius(v, d, r):
    assert desired_radius(v, d) == pytest.approx(r, abs=1e-12)


def test_desired_radius_negative_distance():
    with pytest.raises(ContractError):
        desired_radius(1.0, -0.1)


@given(st.floats(-1, 3), st.floats(-1, 3), st.floats(0, 10), st.floats(0, 10))
def test_desired_radius_monotone(v1, v2, d1, d2):
    v1, v2 = sorted((v1, v2))
    d1, d2 = sorted((d1, d2))
    assert desired_radius(v1, d1) <= desired_radius(v2, d1)
    assert desired_radius(v1, d1) <= desired_radius(v1, d2)


def test_radius_adaptive_values():
    assert radius_adaptive_reward(2.0, 2.0) == 1.0
    assert radius_adaptive_reward(3.5, 3.0) == pytest.approx(math.exp(-1), rel=1e-15)


def test_radius_adaptive_strictly_decreasing_sweep():
    rng = np.random.default_rng(0)
    gaps = np.sort(rng.uniform(0, 3.9, 100))
    star = rng.uniform(1, 5)
    vals = []
    for g in gaps:
        r = star + g if star + g <= 5 else star - g
        vals.append(radius_adaptive_reward(r, star))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0 < v <= 1 for v in vals)


def test_smoothness_and_regularization():
    assert radius_smoothness(2.0, 2.0) == 0.0
    assert radius_smoothness(3.0, 2.0) == -1.0
    assert radius_smoothness(2.2, 2.0) == pytest.approx(-0.04, abs=1e-12)
    assert radius_regularization(3.0) == 0.0
    assert radius_regularization(5.0) == -1.0
    assert radius_regularization(1.0) == -1.0
    assert radius_regularization(4.875) == pytest.approx(-0.25, abs=1e-12)
    for r in np.linspace(1, 5, 81):
        assert -1.0 <= radius_regularization(r) <= 0.0


def test_rest_state_all_penalties_zero():
    aux = auxiliary_rewards(rest_state())
    assert aux["alive"] == 1.0
    assert all(v == 0.0 for k, v in aux.items() if k != "alive")


def test_collision_weighted():
    s = rest_state()
    s["collisions"] = 1
    aux = auxiliary_rewards(s)
    assert aux["collision"] == -1.0
    assert total_reward(aux).weighted["collision"] == -3.0


def test_dof_limit_activates():
    s = rest_state()
    s["dof_pos"][3] = 1.0  # hard limit; soft limit at 0.9
    aux = auxiliary_rewards(s)
    assert aux["dof_limits"] == pytest.approx(-0.1, abs=1e-12)
    assert total_reward(aux).weighted["dof_limits"] == pytest.approx(-0.5, abs=1e-12)
    s["dof_pos"][3] = 0.85
    assert auxiliary_rewards(s)["dof_limits"] == 0.0


def test_individual_aux_terms():
    s = rest_state()
    s["gravity"] = np.array([0.1, -0.2, -math.sqrt(1 - 0.05)])
    s["ang_vel"] = np.array([1.0, 2.0, 9.0])
    s["hip_dev"] = np.array([0.1, 0.0, -0.2, 0.0])
    s["dof_vel"] = np.full(12, 2.0)
    s["dof_acc"] = np.full(12, 10.0)
    s["action"] = np.r_[np.ones(12), 0.5]
    s["torque"] = np.full(12, 3.0)
    s["penetration"] = 0.02
    s["alive"] = False
    s["air_time"] = np.array([0.5, 0.1])
    s["first_contact"] = np.array([True, False])
    aux = auxiliary_rewards(s)
    assert aux["orientation"] == pytest.approx(-0.05)
    assert aux["ang_vel_xy"] == -5.0
    assert aux["hip"] == pytest.approx(-0.05)
    assert aux["dof_vel"] == -48.0
    assert aux["dof_acc"] == -1200.0
    assert aux["action_rate"] == -12.25
    assert aux["energy"] == -108.0
    assert aux["penetrate"] == -0.02
    assert aux["alive"] == 0.0
    assert aux["air_time"] == pytest.approx(0.1)


def test_missing_field():
    s = rest_state()
    del s["torque"]
    with pytest.raises(ContractError, match="torque"):
        auxiliary_rewards(s)


def test_only_alive():
    assert total_reward({"alive": 1.0}).total == 0.15


def test_zero_weights():
    w = RewardWeights(**{t: 0.0 for t in TERMS})
    rng = np.random.default_rng(1)
    assert total_reward(dict(zip(TERMS, rng.normal(size=17))), w).total == 0.0


def test_dot_product_oracle():
    rng = np.random.default_rng(2)
    w = RewardWeights()
    mag = np.array([abs(getattr(w, t)) for t in TERMS])
    for _ in range(100):
        v = rng.normal(size=17)
        b = total_reward(dict(zip(TERMS, v)), w)
        assert b.total == pytest.approx(float(np.dot(mag, v)), rel=1e-12, abs=1e-12)
        assert b.total == sum(b.weighted[t] for t in TERMS)


def test_stationary_total():
    t = step_terms([0, 0, 0], 0.0, [0, 0, 0], 3.0, 3.0, 3.0, rest_state())
    assert abs(total_reward(t).total - 3.65) <= 1e-9


def test_breakdown_json():
    import json
    d = json.loads(total_reward({"alive": 1.0}).to_json())
    assert list(d["terms"]) == list(TERMS) and d["total"] == 0.15


def test_unknown_term():
    with pytest.raises(ContractError):
        total_reward({"bogus": 1.0})
