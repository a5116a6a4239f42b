import math

import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from src.domains import (
    BranchingTrapConfig,
    CycleTrapConfig,
    branching_trap,
    random_task,
)
from src.heuristics import (
    DEAD_END,
    BranchingExactHeuristic,
    CycleExactHeuristic,
    HeuristicKind,
    HeuristicValue,
    RelaxedPlanHeuristic,
    UnreachableGoal,
    ZeroHeuristic,
    extract_relaxed_plan,
    h_rp,
    h_exact_cycle,
    h_without,
    h_zero,
    hadd_propagate,
    make_heuristic,
    relaxed_plan_achieves_goal,
)
from src.tasks import GroundedTask, TaskAction, compile_task, ground_problem, mask_of


class TestTrivialHeuristics:
    """Test the zero and exact heuristics."""

    def test_zero(self):
        """Test the zero heuristic is zero everywhere and admissible."""
        assert h_zero(42) == HeuristicValue(0, 0)
        assert ZeroHeuristic().estimate("anything") == (0, 0)
        assert ZeroHeuristic.admissible

    def test_exact_cycle(self):
        """Test the exact cycle heuristic picks the cheaper direction."""
        h = CycleExactHeuristic(CycleTrapConfig(k=4, goal_residue=14))
        assert h.estimate(0) == (9, 2)
        assert h.estimate(14) == (0, 0)
        assert h.estimate(13) == (1, 1)
        assert h_exact_cycle(CycleTrapConfig(k=4, goal_residue=14))(0) == (9, 2)

    def test_exact_cycle_pure_increments(self):
        """Test a goal reached most cheaply by increments."""
        h = CycleExactHeuristic(CycleTrapConfig(k=4, goal_residue=8))
        assert h.estimate(0) == (8, 8)

    def test_exact_branching(self):
        """Test the exact branching heuristic counts missing labels."""
        h = BranchingExactHeuristic(BranchingTrapConfig())
        assert h.estimate(()) == (16, 9)
        assert h.estimate((0,)) == (8, 8)
        assert h.estimate((0, 1)) == DEAD_END

    def test_memoization_counts_calls(self):
        """Test repeated estimates of one state compute once."""
        h = CycleExactHeuristic(CycleTrapConfig(k=4))
        h.estimate(3)
        h.estimate(3)
        h.estimate(4)
        assert h.calls == 2

    def test_make_heuristic_exact_needs_trap(self, corner_rendezvous):
        """Test the exact heuristic is refused on grounded tasks."""
        with pytest.raises(ValueError, match="only available"):
            make_heuristic(HeuristicKind.EXACT, corner_rendezvous)

    def test_make_heuristic_relaxed_needs_task(self, small_cycle):
        """Test relaxed-plan heuristics are refused on abstract traps."""
        with pytest.raises(ValueError, match="grounded task"):
            make_heuristic(HeuristicKind.RP_COST, small_cycle)

    def test_make_heuristic_kinds(self, small_cycle, corner_rendezvous):
        """Test the factory returns the expected estimator types."""
        assert isinstance(make_heuristic(HeuristicKind.ZERO, small_cycle), ZeroHeuristic)
        assert isinstance(make_heuristic(HeuristicKind.EXACT, small_cycle), CycleExactHeuristic)
        trap = branching_trap(BranchingTrapConfig())
        assert isinstance(make_heuristic(HeuristicKind.EXACT, trap), BranchingExactHeuristic)
        assert isinstance(make_heuristic(HeuristicKind.HADD_COST, corner_rendezvous), RelaxedPlanHeuristic)


class TestAdditivePropagation:
    """Test h_add propagation on the sample task."""

    def test_fact_costs(self, sample_task):
        """Test fact costs follow the cheapest additive support."""
        table = hadd_propagate(sample_task, mask_of(sample_task.init))
        assert table.fact_cost == (0, 2, 5)
        assert table.best_supporter == (None, 0, 1)
        assert table.goal_cost == 5

    def test_unit_costs(self, sample_task):
        """Test cost overrides change the best supporter."""
        table = hadd_propagate(sample_task, mask_of(sample_task.init), costs=[1, 1, 1])
        assert table.fact_cost == (0, 1, 1)
        assert table.best_supporter[2] == 2

    def test_excluded_action(self, sample_task):
        """Test excluded actions never fire."""
        table = hadd_propagate(sample_task, mask_of(sample_task.init), excluded=frozenset({1}))
        assert table.goal_cost == 10
        assert table.best_supporter[2] == 2

    def test_tie_breaks_to_lowest_index(self):
        """Test equal-cost supporters resolve to the lower action index."""
        task = GroundedTask(
            name="ties",
            facts=("s", "g"),
            init=frozenset({0}),
            goal=frozenset({1}),
            actions=(
                TaskAction(name="late", cost=2, pre=frozenset({0}), add=frozenset({1})),
                TaskAction(name="early", cost=2, pre=frozenset({0}), add=frozenset({1})),
            ),
        )
        assert hadd_propagate(task, mask_of(task.init)).best_supporter[1] == 0

    def test_unreachable_goal(self):
        """Test an unreachable goal has infinite cost and no relaxed plan."""
        task = GroundedTask(name="stuck", facts=("s", "g"), init=frozenset({0}), goal=frozenset({1}))
        table = hadd_propagate(task, mask_of(task.init))
        assert math.isinf(table.goal_cost)
        with pytest.raises(UnreachableGoal):
            extract_relaxed_plan(task, mask_of(task.init), table)


class TestRelaxedPlans:
    """Test relaxed-plan extraction and the estimators built on it."""

    def test_extract_relaxed_plan(self, sample_task):
        """Test the plan backchains through best supporters."""
        state = mask_of(sample_task.init)
        plan = extract_relaxed_plan(sample_task, state, hadd_propagate(sample_task, state))
        assert plan.actions == (1, 0)
        assert plan.order == (0, 1)
        assert plan.total_cost == 5
        assert plan.size == 2
        assert relaxed_plan_achieves_goal(sample_task, state, plan)

    def test_goal_state_has_empty_plan(self, sample_task):
        """Test a goal state needs no relaxed actions."""
        state = mask_of({0, 2})
        plan = extract_relaxed_plan(sample_task, state, hadd_propagate(sample_task, state))
        assert plan.size == 0
        assert plan.total_cost == 0

    @pytest.mark.parametrize(
        "kind,expected",
        [
            (HeuristicKind.HADD_COST, (5, 2)),
            (HeuristicKind.RP_COST, (5, 2)),
            (HeuristicKind.RP_SIZE_CHEAP, (5, 2)),
            (HeuristicKind.RP_SIZE_SHORT, (10, 1)),
        ],
    )
    def test_estimates(self, sample_task, kind, expected):
        """Test each relaxed estimator on the sample task."""
        assert h_rp(kind, sample_task)(mask_of(sample_task.init)) == expected

    def test_without_operator(self, sample_task):
        """Test excluding an operator re-plans around it."""
        h = RelaxedPlanHeuristic(sample_task, HeuristicKind.RP_COST)
        state = mask_of(sample_task.init)
        assert h_without(h, 1).estimate(state) == (10, 1)
        assert h_without(h, 2).estimate(state) == (5, 2)
        assert h.estimate(state) == (5, 2)

    def test_without_sole_achiever_is_dead_end(self, sample_task):
        """Test removing every achiever of the goal makes the state a dead end."""
        h = RelaxedPlanHeuristic(sample_task, HeuristicKind.RP_COST)
        assert h.without(1).without(2).estimate(mask_of(sample_task.init)) == DEAD_END

    def test_rejects_non_relaxed_kind(self, sample_task):
        """Test the relaxed estimator refuses unrelated kinds."""
        with pytest.raises(ValueError):
            RelaxedPlanHeuristic(sample_task, HeuristicKind.ZERO)

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=(1 << 8) - 1))
    def test_relaxed_plans_on_random_tasks(self, seed, state):
        """Test any extracted plan is delete-free executable and consistent with the estimate."""
        task = random_task(seed)
        compiled = compile_task(task)
        table = hadd_propagate(compiled, state)
        if math.isinf(table.goal_cost):
            assert RelaxedPlanHeuristic(compiled, HeuristicKind.RP_COST).estimate(state) == DEAD_END
            return
        plan = extract_relaxed_plan(compiled, state, table)
        assert relaxed_plan_achieves_goal(compiled, state, plan)
        estimate = RelaxedPlanHeuristic(compiled, HeuristicKind.RP_COST).estimate(state)
        assert estimate == (plan.total_cost, plan.size)
        assert len(set(plan.actions)) == plan.size

    def test_grounded_problem_exposes_compiled_task(self, sample_task):
        """Test the estimator accepts the compiled form from a grounded problem."""
        problem = ground_problem(sample_task)
        h = make_heuristic(HeuristicKind.RP_SIZE_CHEAP, problem)
        assert h.estimate(problem.initial) == (5, 2)


class TestAdditiveProperties:
    """Monotonicity and unit-cost agreement of the additive estimates."""

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(
        st.integers(min_value=0, max_value=10_000),
        st.integers(min_value=0, max_value=(1 << 8) - 1),
        st.integers(min_value=0, max_value=11),
    )
    def test_lowering_a_cost_never_raises_hadd(self, seed, state, which):
        """Test every fact cost and the goal cost are monotone in each action cost."""
        compiled = compile_task(random_task(seed))
        costs = [action.cost for action in compiled.actions]
        lowered = list(costs)
        lowered[which] = max(1, costs[which] // 2)
        before = hadd_propagate(compiled, state, costs)
        after = hadd_propagate(compiled, state, lowered)
        assert all(a <= b for a, b in zip(after.fact_cost, before.fact_cost))
        assert after.goal_cost <= before.goal_cost

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=(1 << 8) - 1))
    def test_short_equals_cheap_on_unit_costs(self, seed, state):
        """Test the two size estimates agree when every action costs one."""
        compiled = compile_task(random_task(seed, max_cost=1))
        short = RelaxedPlanHeuristic(compiled, HeuristicKind.RP_SIZE_SHORT).estimate(state)
        cheap = RelaxedPlanHeuristic(compiled, HeuristicKind.RP_SIZE_CHEAP).estimate(state)
        assert short.size == cheap.size
