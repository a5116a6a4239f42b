from fractions import Fraction

import pytest

from src.bench import oracle_optimum
from src.domains import CycleTrapConfig, TravelConfig, cycle_trap, random_task, rendezvous_task
from src.evaluators import Evaluator, EvaluatorConfig, EvaluatorKind, TieBreak
from src.graph import NodeFactory, OutEdge, Plan, SearchNode
from src.heuristics import (
    CycleExactHeuristic,
    HeuristicKind,
    RelaxedPlanHeuristic,
    ZeroHeuristic,
    make_heuristic,
)
from src.search import (
    BestFirstSearch,
    ClosedMap,
    ConfigError,
    DuplicateVerdict,
    Incumbent,
    SearchLimits,
    SearchStatus,
    best_first_bnb,
    bound_test,
    duplicate_test,
    plateau_detect,
    run_deterministically,
    useful_lookahead,
)
from src.tasks import GroundedTask, TaskAction, ground_problem, validate_plan


def cost_config(**kwargs) -> EvaluatorConfig:
    return EvaluatorConfig(kind=EvaluatorKind.COST, **kwargs)


def size_config(**kwargs) -> EvaluatorConfig:
    return EvaluatorConfig(kind=EvaluatorKind.SIZE, **kwargs)


class TestPipelineSteps:
    """Test the building blocks of the search loop."""

    def test_closed_map_verdicts(self):
        """Test fresh, dominated and improving duplicates."""
        closed = ClosedMap()
        assert closed.check(SearchNode(state=1, g_cost=5, g_size=3)) is DuplicateVerdict.FRESH
        assert closed.check(SearchNode(state=1, g_cost=5, g_size=3)) is DuplicateVerdict.PRUNE
        assert closed.check(SearchNode(state=1, g_cost=7, g_size=4)) is DuplicateVerdict.PRUNE
        assert closed.check(SearchNode(state=1, g_cost=9, g_size=1)) is DuplicateVerdict.REOPEN
        assert closed.check(SearchNode(state=1, g_cost=4, g_size=9)) is DuplicateVerdict.REOPEN
        assert closed.get(1) == (4, 1)

    def test_duplicate_test_delegates(self):
        """Test the duplicate test reads the closed map it is given."""
        closed = ClosedMap()
        node = SearchNode(state=3, g_cost=2, g_size=2)
        assert duplicate_test(node, closed) is DuplicateVerdict.FRESH
        assert duplicate_test(node, closed) is DuplicateVerdict.PRUNE

    def test_bound_test_prunes_ties(self):
        """Test a node matching the incumbent cost is pruned."""
        incumbent = Incumbent()
        node = SearchNode(state=0, g_cost=6)
        assert not bound_test(node, 100, incumbent)
        incumbent.improve(Plan(total_cost=10, length=1))
        assert bound_test(node, 4, incumbent)
        assert not bound_test(node, 3, incumbent)

    def test_incumbent_must_improve(self):
        """Test the incumbent bound only decreases."""
        incumbent = Incumbent()
        incumbent.improve(Plan(total_cost=10))
        with pytest.raises(ValueError):
            incumbent.improve(Plan(total_cost=10))

    def test_plateau_detect(self, small_cycle):
        """Test plateaus with and without a threshold."""
        factory = NodeFactory()
        root = factory.root(0)
        cheap = factory.extend(root, OutEdge("inc", 1, 1))
        dear = factory.extend(root, OutEdge("dec", 15, 8))
        cost_eval = Evaluator.bind(cost_config(), small_cycle)
        size_eval = Evaluator.bind(size_config(), small_cycle)

        assert not plateau_detect(root, cost_eval)
        assert not plateau_detect(cheap, cost_eval)
        assert not plateau_detect(cheap, size_eval)
        assert plateau_detect(cheap, cost_eval, Fraction(1, 8), 8)
        assert not plateau_detect(dear, cost_eval, Fraction(1, 8), 8)
        assert plateau_detect(dear, cost_eval, Fraction(1), 8)


class TestBestFirstSearch:
    """Test full search runs on small instances."""

    @pytest.mark.parametrize("kind", list(EvaluatorKind))
    def test_proves_cycle_optimum(self, small_cycle, kind):
        """Test every evaluator proves the k=4 optimum."""
        outcome = best_first_bnb(small_cycle, EvaluatorConfig(kind=kind), ZeroHeuristic())
        assert outcome.status is SearchStatus.PROVED_OPTIMAL
        assert outcome.incumbent.bound_cost == 9
        assert outcome.incumbent.plan.actions == ("dec", "dec")
        assert outcome.stats.proof_expansions == outcome.stats.expansions

    def test_exact_heuristic_goes_straight(self, small_cycle):
        """Test an exact heuristic finds the optimum in a handful of expansions."""
        outcome = best_first_bnb(
            small_cycle,
            cost_config(tiebreak=TieBreak.ON_SIZE),
            CycleExactHeuristic(small_cycle.config),
            prune_heuristic=CycleExactHeuristic(small_cycle.config),
        )
        assert outcome.status is SearchStatus.PROVED_OPTIMAL
        assert outcome.incumbent.bound_cost == 9
        assert outcome.stats.discovery_expansions == 2

    def test_anytime_events_improve(self):
        """Test each reported solution is strictly cheaper than the last."""
        problem = cycle_trap(CycleTrapConfig(k=4, expensive_cost=20, goal_residue=14))
        outcome = best_first_bnb(problem, size_config(), ZeroHeuristic())
        costs = [e.cost for e in outcome.events]
        assert costs == [21, 14]
        assert [e.size for e in outcome.events] == [2, 14]
        expansions = [e.expansions_at_event for e in outcome.events]
        assert expansions == sorted(expansions)
        assert outcome.stats.discovery_expansions == expansions[-1]
        assert outcome.stats.discovery_expansions <= outcome.stats.proof_expansions
        assert outcome.status is SearchStatus.PROVED_OPTIMAL

    def test_listener_receives_events(self, small_cycle):
        """Test the listener sees each event as it happens."""
        seen = []
        outcome = best_first_bnb(small_cycle, size_config(), ZeroHeuristic(), listener=seen.append)
        assert seen == outcome.events

    def test_budget_exhausted(self):
        """Test an expansion limit ends the run with a status, not an error."""
        problem = cycle_trap(CycleTrapConfig(k=14))
        outcome = best_first_bnb(problem, cost_config(), ZeroHeuristic(), limits=SearchLimits(max_expansions=5))
        assert outcome.status is SearchStatus.BUDGET_EXHAUSTED
        assert outcome.stats.expansions == 5
        assert outcome.events == []
        assert outcome.stats.proof_expansions is None

    def test_memory_limit(self):
        """Test the node limit also ends the run."""
        problem = cycle_trap(CycleTrapConfig(k=10))
        outcome = best_first_bnb(problem, cost_config(), ZeroHeuristic(), limits=SearchLimits(max_nodes_in_memory=20))
        assert outcome.status is SearchStatus.BUDGET_EXHAUSTED

    def test_exhausted_without_solution(self):
        """Test an unreachable goal exhausts the space."""
        task = GroundedTask(
            name="stuck",
            facts=("s", "t", "g"),
            init=frozenset({0}),
            goal=frozenset({2}),
            actions=(TaskAction(name="go", cost=1, pre=frozenset({0}), add=frozenset({1})),),
        )
        outcome = best_first_bnb(ground_problem(task), cost_config(), ZeroHeuristic())
        assert outcome.status is SearchStatus.EXHAUSTED_NO_SOLUTION
        assert outcome.incumbent.plan is None
        assert outcome.stats.expansions == 2

    def test_initial_goal(self):
        """Test a goal initial state yields the empty plan."""
        problem = cycle_trap(CycleTrapConfig(k=4, goal_residue=0))
        outcome = best_first_bnb(problem, cost_config(), ZeroHeuristic())
        assert outcome.incumbent.bound_cost == 0
        assert outcome.incumbent.plan.length == 0
        assert outcome.stats.expansions == 0

    def test_counts_generations(self, small_cycle):
        """Test the root and every child count as generated."""
        outcome = best_first_bnb(small_cycle, cost_config(), ZeroHeuristic())
        assert outcome.stats.generations == 1 + 2 * outcome.stats.expansions

    def test_inadmissible_prune_rejected(self, sample_task):
        """Test pruning with an inadmissible estimator is refused."""
        problem = ground_problem(sample_task)
        with pytest.raises(ConfigError, match="not admissible"):
            BestFirstSearch(
                problem,
                cost_config(),
                ZeroHeuristic(),
                prune_heuristic=make_heuristic(HeuristicKind.RP_COST, problem),
            )

    def test_lookahead_needs_exclusion(self, small_cycle):
        """Test lookahead needs a heuristic that can exclude operators."""
        with pytest.raises(ConfigError, match="lookahead"):
            BestFirstSearch(small_cycle, cost_config(), ZeroHeuristic(), lookahead=True)

    def test_deterministic_runs_repeat(self, small_cycle):
        """Test two deterministic runs agree on every statistic."""
        first = run_deterministically(small_cycle, size_config(), ZeroHeuristic)
        second = run_deterministically(small_cycle, size_config(), ZeroHeuristic)
        assert first.stats == second.stats
        assert [(e.cost, e.expansions_at_event, e.wall_ms_at_event) for e in first.events] == [
            (e.cost, e.expansions_at_event, e.wall_ms_at_event) for e in second.events
        ]
        assert first.wall_ms == 0

    def test_deterministic_rejects_wall_clock(self, small_cycle):
        """Test a wall-clock limit is refused for deterministic runs."""
        with pytest.raises(ConfigError):
            run_deterministically(small_cycle, cost_config(), ZeroHeuristic, limits=SearchLimits(max_wall_ms=10))

    def test_hybrid_reports_normalizer(self, small_cycle):
        """Test the outcome carries the normalization constant in effect."""
        outcome = best_first_bnb(small_cycle, EvaluatorConfig(kind=EvaluatorKind.HYBRID), ZeroHeuristic())
        assert outcome.max_cost == 8


class TestUsefulLookahead:
    """Test usefulness scoring and lookahead runs."""

    @staticmethod
    def _task(redundant: bool) -> GroundedTask:
        actions = [
            TaskAction(name="achieve", cost=1, pre=frozenset({0}), add=frozenset({1})),
            TaskAction(name="idle", cost=1, pre=frozenset({0}), add=frozenset({2})),
        ]
        if redundant:
            actions.append(TaskAction(name="achieve-too", cost=1, pre=frozenset({0}), add=frozenset({1})))
        return GroundedTask(
            name="useful",
            facts=("s", "g", "f"),
            init=frozenset({0}),
            goal=frozenset({1}),
            actions=tuple(actions),
        )

    def _score(self, task: GroundedTask):
        problem = ground_problem(task)
        heuristic = RelaxedPlanHeuristic(problem.compiled, HeuristicKind.RP_COST)
        factory = NodeFactory()
        root = factory.root(problem.initial)
        return useful_lookahead(root, problem, heuristic, heuristic.without, factory)

    def test_sole_achiever_is_infinitely_useful(self):
        """Test removing the only achiever of a needed fact scores infinity."""
        result = self._score(self._task(redundant=False))
        assert result.usefulness == [float("inf"), 0]
        assert result.chosen == 0
        assert result.chosen_child.action == 0

    def test_redundant_achiever_is_finitely_useful(self):
        """Test a duplicated achiever scores by the estimate it saves."""
        result = self._score(self._task(redundant=True))
        assert result.usefulness == [1, 0, 1]
        assert result.chosen == 0

    def test_no_useful_operator(self):
        """Test nothing is chosen when no operator helps."""
        task = GroundedTask(
            name="idle",
            facts=("s", "f", "g"),
            init=frozenset({0}),
            goal=frozenset({2}),
            actions=(TaskAction(name="idle", cost=1, pre=frozenset({0}), add=frozenset({1})),),
        )
        result = self._score(task)
        assert result.usefulness == [float("-inf")]
        assert result.chosen is None

    def test_lookahead_run_proves_optimum(self, corner_rendezvous):
        """Test lookahead keeps the search complete and optimal."""
        outcome = best_first_bnb(
            corner_rendezvous,
            cost_config(),
            make_heuristic(HeuristicKind.RP_COST, corner_rendezvous),
            lookahead=True,
        )
        assert outcome.status is SearchStatus.PROVED_OPTIMAL
        assert outcome.incumbent.bound_cost == 7004
        assert outcome.stats.lookahead_invocations > 0

    def test_lookahead_default_tau_is_epsilon(self, corner_rendezvous):
        """Test the cost-family plateau threshold defaults to epsilon."""
        search = BestFirstSearch(
            corner_rendezvous,
            cost_config(),
            make_heuristic(HeuristicKind.RP_COST, corner_rendezvous),
            lookahead=True,
        )
        assert search.plateau_tau == Fraction(1, 10000)

    def test_lookahead_respects_expansion_limit(self):
        """Test the lookahead child is not expanded once the budget is spent."""
        task = GroundedTask(
            name="ladder",
            facts=("f0", "f1", "f2", "f3"),
            init=frozenset({0}),
            goal=frozenset({3}),
            actions=tuple(
                TaskAction(name=f"a{i}", cost=1, pre=frozenset({i}), add=frozenset({i + 1})) for i in range(3)
            ),
        )
        problem = ground_problem(task)
        outcome = best_first_bnb(
            problem,
            cost_config(),
            make_heuristic(HeuristicKind.HADD_COST, problem),
            limits=SearchLimits(max_expansions=2),
            lookahead=True,
        )
        assert outcome.status is SearchStatus.BUDGET_EXHAUSTED
        assert outcome.stats.expansions == 2
        assert outcome.stats.lookahead_invocations == 1

    def test_lookahead_enqueues_every_child(self, corner_rendezvous, monkeypatch):
        """Test a lookahead expansion generates at least the children of a plain expansion."""
        problem = corner_rendezvous
        search = BestFirstSearch(problem, cost_config(), make_heuristic(HeuristicKind.RP_COST, problem), lookahead=True)
        generated: dict = {}
        enqueue = search._enqueue

        def record(node):
            if node.parent is not None:
                generated.setdefault(node.parent.state, set()).add(node.state)
            enqueue(node)

        monkeypatch.setattr(search, "_enqueue", record)
        outcome = search.run()
        assert outcome.stats.lookahead_invocations > 0
        for parent, children in generated.items():
            assert children >= {edge.target for edge in problem.expand(parent)}

    def test_flying_back_is_not_useful(self):
        """Test usefulness after flying to the passenger: boarding is indispensable, returning is not."""
        config = TravelConfig(passengers=1, planes=1, passenger_cities=("c2",), plane_cities=("c1",))
        problem = ground_problem(rendezvous_task(config))
        names = [action.name for action in problem.task.actions]
        factory = NodeFactory()
        root = factory.root(problem.initial)
        [fly] = [e for e in problem.expand(root.state) if names[e.action] == "fly-plane1-c1-c2"]
        node = factory.extend(root, fly)
        heuristic = make_heuristic(HeuristicKind.RP_COST, problem)
        result = useful_lookahead(node, problem, heuristic, heuristic.without, factory)
        scores = {names[child.action]: score for child, score in zip(result.children, result.usefulness)}
        assert scores["board-p1-plane1-c2"] == float("inf")
        assert scores["fly-plane1-c2-c1"] == 7002 - 17002
        assert scores["fly-plane1-c2-center"] > 0
        assert names[result.chosen_child.action] == "board-p1-plane1-c2"


class TestSearchInvariants:
    """Properties that hold across instances."""

    def test_diamond_reopens_to_optimum(self):
        """Test a cheaper but longer revisit reopens a closed state and ends at the oracle optimum."""
        edges = [("s", "a", 1), ("a", "m", 1), ("s", "m", 3), ("m", "g", 1)]
        facts = ("s", "a", "m", "g")
        task = GroundedTask(
            name="diamond",
            facts=facts,
            init=frozenset({0}),
            goal=frozenset({3}),
            actions=tuple(
                TaskAction(
                    name=f"{src}-{dst}",
                    cost=cost,
                    pre=frozenset({facts.index(src)}),
                    add=frozenset({facts.index(dst)}),
                    delete=frozenset({facts.index(src)}),
                )
                for src, dst, cost in edges
            ),
        )
        problem = ground_problem(task)
        outcome = best_first_bnb(problem, size_config(), ZeroHeuristic())
        assert outcome.stats.reopenings == 1
        assert [e.cost for e in outcome.events] == [4, 3]
        assert outcome.incumbent.bound_cost == oracle_optimum(problem, 100)[0] == 3
        assert problem.action_names(outcome.incumbent.plan) == ["s-a", "a-m", "m-g"]

    @pytest.mark.parametrize("goal", [0, 5, 17, 33, 48, 62])
    def test_pruning_never_changes_the_optimum(self, goal, monkeypatch):
        """Test a run with admissible bound pruning ends at the same cost as one without."""
        problem = cycle_trap(CycleTrapConfig(k=6, goal_residue=goal))
        exact = CycleExactHeuristic(problem.config)
        pruned = best_first_bnb(problem, size_config(), ZeroHeuristic(), prune_heuristic=exact)
        monkeypatch.setattr(BestFirstSearch, "bound_test", lambda self, node: False)
        unpruned = best_first_bnb(problem, size_config(), ZeroHeuristic(), prune_heuristic=exact)
        assert pruned.status is unpruned.status is SearchStatus.PROVED_OPTIMAL
        assert pruned.incumbent.bound_cost == unpruned.incumbent.bound_cost
        assert pruned.stats.expansions <= unpruned.stats.expansions
        assert unpruned.stats.bound_prunes == 0

    @pytest.mark.parametrize("kind", [EvaluatorKind.COST, EvaluatorKind.SIZE, EvaluatorKind.CS_SIZE])
    def test_plans_execute(self, kind):
        """Test every reported plan is executable from init and reaches the goal."""
        guidance = {
            EvaluatorKind.COST: HeuristicKind.HADD_COST,
            EvaluatorKind.SIZE: HeuristicKind.RP_SIZE_SHORT,
            EvaluatorKind.CS_SIZE: HeuristicKind.RP_SIZE_CHEAP,
        }
        for seed in range(30):
            task = random_task(seed)
            problem = ground_problem(task)
            outcome = best_first_bnb(problem, EvaluatorConfig(kind=kind), make_heuristic(guidance[kind], problem))
            for event in outcome.events:
                assert validate_plan(task, event.plan.actions)
                assert sum(task.actions[i].cost for i in event.plan.actions) == event.cost
