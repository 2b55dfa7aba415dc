"""Congestion games with load-coupled costs, reward-inaction learning and a
smart-charging power-flow backend."""

from chargegame._core import (  # noqa: F401
    GameSpec,
    GridNetwork,
    GridScenario,
    LambdaFn,
    LearnerConfig,
    MixedProfile,
    PowerFlowSolution,
    PricingConfig,
    ReductionResult,
    Trajectory,
    UpdateMode,
    aggregate_load,
    build_congestion_game,
    characterize_ne,
    charging_cost,
    compute_cmax,
    continuous_potential,
    continuous_potential_raw,
    cost,
    count_loads,
    drift_closed_form,
    drift_monte_carlo,
    eno_cost,
    enumerate_ne_bruteforce,
    expected_cost,
    expected_cost_mc,
    expected_cost_raw,
    is_nash,
    load_grid_scenario,
    lyapunov_descent_check,
    marginal_price,
    ordinal_potential,
    reduce_grid,
    run,
    solve_power_flow,
    update_strategy,
)

__version__ = "0.1.0"
