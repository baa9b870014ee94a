import numpy as np
import pytest

from platoonkit.control import ControllerConfig
from platoonkit.dynamics import VehicleParams, VehicleState


@pytest.fixture
def figure_gains():
    """Gains shared by the shipped figure scenarios: (k_a, k_v, k_p) = (0.4, 1, 0.8)."""
    return dict(k_a=0.4, k_v=1.0, k_p=0.8)


@pytest.fixture
def default_params():
    return VehicleParams(tau=0.5, length=5.0, decel_limit=9.0, accel_limit=3.0)


def random_stable_config(rng: np.random.Generator, gamma: float | None = None):
    """Sample (cfg, tau, gamma) whose per-vehicle loop is Hurwitz.

    Gains are drawn freely and re-drawn until the cubic's Routh condition
    k_v + k_p*h_w > tau*k_p holds; string stability is NOT implied.
    """
    while True:
        tau = rng.uniform(0.2, 0.8)
        g = rng.uniform(0.0, 1.0) if gamma is None else gamma
        cfg = ControllerConfig(
            k_a=rng.uniform(0.0, 1.2),
            k_v=rng.uniform(0.2, 3.0),
            k_p=rng.uniform(0.1, 3.0),
            h_w=rng.uniform(0.3, 2.0),
        )
        if cfg.k_v + cfg.k_p * cfg.h_w > tau * cfg.k_p:
            return cfg, tau, g


def reference_platoon_sim(scenario, receptions=None, wfactor=None):
    """Scalar-loop platoon simulation built from the public step/control ops.

    Independent of the vectorized engine: one step_vehicle call per vehicle
    per step, controls through cacc_control/acc_control/saturate.  receptions
    is an optional (n_followers, n_steps) boolean array; wfactor (if given)
    scales the feed-forward deterministically instead.
    """
    from platoonkit.control import acc_control, cacc_control, saturate
    from platoonkit.dynamics import leader_input, spacing_error, step_vehicle

    sc = scenario
    M = sc.n_vehicles
    states = []
    row = [VehicleState(0.0, sc.initial_speed, 0.0)]
    for i in range(1, M):
        row.append(
            VehicleState(
                row[-1].x - sc.standstill_gap - sc.controller.h_w * sc.initial_speed,
                sc.initial_speed,
                0.0,
            )
        )
    states.append(row)
    errors = [[spacing_error(row[i], row[i - 1], sc.controller.h_w, sc.standstill_gap)
               for i in range(1, M)]]
    for k in range(sc.n_steps):
        t = k * sc.dt
        prev = states[-1]
        new = []
        u0 = leader_input(sc.leader, prev[0], t)
        new.append(step_vehicle(prev[0], saturate(u0, sc.params), sc.dt, sc.params))
        for i in range(1, M):
            if sc.controller.mode == "acc":
                u = acc_control(prev[i], prev[i - 1], sc.controller, sc.standstill_gap)
            else:
                if receptions is not None:
                    recv = prev[i - 1].a if receptions[i - 1, k] else None
                    u = cacc_control(prev[i], prev[i - 1], recv, sc.controller, sc.standstill_gap)
                elif wfactor is not None:
                    u = cacc_control(prev[i], prev[i - 1], wfactor * prev[i - 1].a,
                                     sc.controller, sc.standstill_gap)
                else:
                    u = cacc_control(prev[i], prev[i - 1], prev[i - 1].a,
                                     sc.controller, sc.standstill_gap)
            new.append(step_vehicle(prev[i], saturate(u, sc.params), sc.dt, sc.params))
        states.append(new)
        errors.append([spacing_error(new[i], new[i - 1], sc.controller.h_w, sc.standstill_gap)
                       for i in range(1, M)])
    return np.array([[(s.x, s.v, s.a) for s in row] for row in states]), np.array(errors)
