"""
Branch-and-Bound - Nonlinear branch-and-bound over binary variables

Every node is a continuous NLP in which the binaries fixed so far have
lb = ub and the others are relaxed to [0, 1]:
- best-bound node selection (parent relaxation objective), deeper nodes first on ties
- most-fractional branching, lowest index on ties
- nodes whose relaxation objective reaches the incumbent are pruned
- a rounding heuristic (round fractional indicators down) proposes incumbents
- integral relaxations are confirmed by one solve with every binary fixed

For nonconvex relaxations the result is a feasible point, not a certified
global optimum. A relaxation that fails above full depth is branched rather
than pruned, since a local NLP failure does not prove infeasibility.
"""

import heapq
import itertools
import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from trigopt.errors import ConfigError
from trigopt.logic.postprocess import round_relaxed
from trigopt.nlp.ipm import NlpOptions, NlpSolution, NlpStatus, solve_nlp
from trigopt.nlp.problem import NlpProblem, constraint_violation, evaluate
from trigopt.ocp.shooting import TranscribedNlp

logger = logging.getLogger(__name__)


class MinlpStatus(str, Enum):
    OPTIMAL_WITHIN_TREE = "optimal_within_tree"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class BnbOptions:
    """
    Branch-and-bound settings.

    Attributes:
        fractional_tol: |delta - round(delta)| above this is fractional
        feasibility_tol: Max constraint violation of an incumbent
        prune_tol: Nodes with relaxation >= incumbent - prune_tol are pruned
        node_limit: Maximum number of nodes solved
        workers: Threads solving open nodes in parallel (1 is deterministic)
        rounding_heuristic: Try rounded relaxations as incumbents
        nlp: Options of the node NLP solves
    """

    fractional_tol: float = 1e-5
    feasibility_tol: float = 1e-6
    prune_tol: float = 1e-9
    node_limit: int = 10000
    workers: int = 1
    rounding_heuristic: bool = True
    nlp: NlpOptions = field(default_factory=NlpOptions)

    def __post_init__(self) -> None:
        if not 0 < self.fractional_tol < 0.5:
            raise ConfigError(f"fractional_tol must be in (0, 0.5), got {self.fractional_tol}")
        if self.feasibility_tol <= 0:
            raise ConfigError(f"feasibility_tol must be positive, got {self.feasibility_tol}")
        if self.node_limit < 1:
            raise ConfigError(f"node_limit must be at least 1, got {self.node_limit}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")

    @classmethod
    def from_config(
        cls, section: Optional[Dict[str, Any]], nlp_section: Optional[Dict[str, Any]] = None
    ) -> "BnbOptions":
        """Build options from the ``bnb`` (and ``nlp``) sections of config.yaml."""
        section = dict(section or {})
        known = {"fractional_tol", "feasibility_tol", "prune_tol", "node_limit", "workers", "rounding_heuristic"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"Unknown bnb option(s): {', '.join(sorted(unknown))}")
        converters = {"node_limit": int, "workers": int, "rounding_heuristic": bool}
        values = {k: converters.get(k, float)(v) for k, v in section.items()}
        return cls(nlp=NlpOptions.from_config(nlp_section), **values)


@dataclass(frozen=True, eq=False)
class BnbNode:
    """
    Open node of the tree.

    Attributes:
        fixings: Binary index -> fixed value (0 or 1)
        lower_bound: Relaxation objective of the parent (-inf at the root)
        warm_start: Parent primal point with the new fixing clamped
        depth: Number of fixings
        parent: Sequence number of the parent node (-1 at the root)
    """

    fixings: Dict[int, int]
    lower_bound: float
    warm_start: np.ndarray
    depth: int
    parent: int = -1


@dataclass(frozen=True, eq=False)
class MinlpSolution:
    """
    Result of branch-and-bound or enumeration.

    Attributes:
        x: Best integer-feasible point (None when none was found)
        assignment: Binary values at the integer indices
        objective: Objective of x (inf when none)
        status: Outcome
        incumbent_history: (node sequence number, objective) per improvement
        node_count: Nodes (or assignments) solved
        nlp_solves: NLP solves including confirmations
        runtime: Wall-clock seconds
        node_log: One record per node
    """

    x: Optional[np.ndarray]
    assignment: np.ndarray
    objective: float
    status: MinlpStatus
    incumbent_history: List[Tuple[int, float]] = field(default_factory=list)
    node_count: int = 0
    nlp_solves: int = 0
    runtime: float = 0.0
    node_log: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.x is not None


def fix_binaries(problem: NlpProblem, fixings: Dict[int, int]) -> NlpProblem:
    """Copy of the problem with the given binaries fixed through their bounds."""
    if not fixings:
        return problem
    lb = problem.lb.copy()
    ub = problem.ub.copy()
    index = np.fromiter(fixings.keys(), dtype=np.int64)
    values = np.fromiter(fixings.values(), dtype=float)
    lb[index] = values
    ub[index] = values
    return problem.with_bounds(lb, ub)


def fractionality(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.abs(values - np.round(values))


def select_branch_variable(point, integer_indices: Sequence[int], tol: float = 1e-5) -> int:
    """
    Most fractional binary (closest to 0.5), lowest index on ties.

    Args:
        point: Relaxed point
        integer_indices: Indices of the binary variables
        tol: Fractional tolerance

    Returns:
        Global index of the variable to branch on

    Raises:
        ValueError: If no binary is fractional
    """
    indices = np.asarray(integer_indices, dtype=np.int64)
    frac = fractionality(np.asarray(point, dtype=float)[indices])
    if indices.size == 0 or frac.max() <= tol:
        raise ValueError("No fractional binary variable to branch on")
    best = frac.max()
    candidates = indices[frac >= best - 1e-15]
    return int(candidates.min())


def next_unfixed_variable(fixings: Dict[int, int], integer_indices: Sequence[int]) -> int:
    """
    Branching index for a node whose relaxation gave no usable point.

    Continues the sweep from the most recently fixed binary: the first free
    index after it in stage-major order, wrapping around. At the root this is
    the first binary.

    Raises:
        ValueError: If every binary is fixed
    """
    indices = sorted(int(i) for i in integer_indices)
    free = [i for i in indices if i not in fixings]
    if not free:
        raise ValueError("All binaries are fixed")
    if not fixings:
        return free[0]
    last = next(reversed(list(fixings)))
    later = [i for i in free if i > last]
    return later[0] if later else free[0]


class _NodeLog:
    """Collects node records and mirrors them to a JSON-lines stream."""

    def __init__(self, sink: Union[None, str, Path, TextIO]) -> None:
        self.records: List[Dict[str, Any]] = []
        self._owned = False
        self._stream: Optional[TextIO] = None
        if isinstance(sink, (str, Path)):
            Path(sink).parent.mkdir(parents=True, exist_ok=True)
            self._stream = open(sink, "w")
            self._owned = True
        elif sink is not None:
            self._stream = sink

    def write(self, record: Dict[str, Any]) -> None:
        self.records.append(record)
        if self._stream is not None:
            self._stream.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._owned and self._stream is not None:
            self._stream.close()


def _finite(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


class BranchAndBound:
    """
    Nonlinear branch-and-bound driver.

    Args:
        problem: Problem with binaries boxed in [0, 1]
        integer_indices: Indices of the binary variables
        options: Branch-and-bound options
    """

    def __init__(
        self,
        problem: NlpProblem,
        integer_indices: Sequence[int],
        options: Optional[BnbOptions] = None,
    ) -> None:
        self.problem = problem
        self.integer_indices = np.asarray(sorted(int(i) for i in integer_indices), dtype=np.int64)
        self.options = options or BnbOptions()
        if self.integer_indices.size and (
            np.any(problem.lb[self.integer_indices] < 0.0) or np.any(problem.ub[self.integer_indices] > 1.0)
        ):
            raise ConfigError("Binary variables must be boxed in [0, 1]")
        self._lock = threading.Lock()
        self._seq = itertools.count()
        self.incumbent_x: Optional[np.ndarray] = None
        self.incumbent_objective = math.inf
        self.history: List[Tuple[int, float]] = []
        self.nlp_solves = 0
        self.uncertified = False

    def _next_seq(self) -> int:
        with self._lock:
            return next(self._seq)

    def _solve(self, fixings: Dict[int, int], warm_start: np.ndarray) -> NlpSolution:
        problem = fix_binaries(self.problem, fixings)
        start = np.clip(warm_start, problem.lb, problem.ub)
        with self._lock:
            self.nlp_solves += 1
        return solve_nlp(problem, start, self.options.nlp)

    def _offer(self, x: np.ndarray, seq: int, source: str) -> bool:
        """Accept x as incumbent if feasible and strictly better."""
        tol = self.options.feasibility_tol
        if constraint_violation(self.problem, x) > tol:
            return False
        if np.any(fractionality(x[self.integer_indices]) > self.options.fractional_tol):
            return False
        objective = evaluate(self.problem, x)[0]
        with self._lock:
            if objective >= self.incumbent_objective:
                return False
            self.incumbent_x = x.copy()
            self.incumbent_objective = objective
            self.history.append((seq, objective))
        logger.info("New incumbent %.8g at node %d (%s)", objective, seq, source)
        return True

    def _children(self, node: BnbNode, index: int, point: np.ndarray, bound: float, seq: int) -> List[BnbNode]:
        children = []
        for value in (0, 1):
            fixings = dict(node.fixings)
            fixings[index] = value
            warm = point.copy()
            warm[index] = float(value)
            children.append(BnbNode(fixings, bound, warm, node.depth + 1, seq))
        return children

    def _confirm(self, solution: NlpSolution, node: BnbNode, seq: int) -> bool:
        x = solution.x.copy()
        rounded = np.round(x[self.integer_indices])
        x[self.integer_indices] = rounded
        if len(node.fixings) == self.integer_indices.size:
            return self._offer(x, seq, "relaxation")
        fixings = {int(i): int(v) for i, v in zip(self.integer_indices, rounded)}
        confirm = self._solve(fixings, x)
        if confirm.status != NlpStatus.OPTIMAL:
            return False
        return self._offer(confirm.x, seq, "confirmed relaxation")

    def _try_rounding(self, solution: NlpSolution, seq: int) -> None:
        if not self.options.rounding_heuristic:
            return
        x = solution.x.copy()
        x[self.integer_indices] = round_relaxed(np.clip(x[self.integer_indices], 0.0, 1.0))
        self._offer(x, seq, "rounding")

    def run(
        self,
        initial_guess: np.ndarray,
        node_log: Union[None, str, Path, TextIO] = None,
    ) -> MinlpSolution:
        """
        Explore the tree from the root relaxation.

        Args:
            initial_guess: Starting point of the root relaxation
            node_log: Optional path or stream for JSON-lines node records

        Returns:
            MinlpSolution
        """
        started = time.perf_counter()
        opts = self.options
        log = _NodeLog(node_log)
        n_bin = self.integer_indices.size
        root = BnbNode({}, -math.inf, np.asarray(initial_guess, dtype=float), 0)
        heap: List[Tuple[float, int, int, BnbNode]] = [(root.lower_bound, 0, -1, root)]
        order = itertools.count()
        solved = 0
        limit_hit = False

        executor = ThreadPoolExecutor(max_workers=opts.workers) if opts.workers > 1 else None
        try:
            while heap:
                batch: List[BnbNode] = []
                while heap and len(batch) < opts.workers:
                    _, _, _, node = heapq.heappop(heap)
                    if node.lower_bound >= self.incumbent_objective - opts.prune_tol:
                        log.write(self._record(self._next_seq(), 0, node, "pruned_by_bound", None, "pruned"))
                        continue
                    if solved + len(batch) >= opts.node_limit:
                        limit_hit = True
                        heapq.heappush(heap, (node.lower_bound, -node.depth, next(order), node))
                        break
                    batch.append(node)
                if not batch:
                    if limit_hit:
                        break
                    continue

                if executor is None:
                    results = [self._solve(node.fixings, node.warm_start) for node in batch]
                else:
                    futures = [executor.submit(self._solve, node.fixings, node.warm_start) for node in batch]
                    results = [future.result() for future in futures]
                solved += len(batch)

                for worker, (node, solution) in enumerate(zip(batch, results)):
                    seq = self._next_seq()
                    for child in self._process(node, solution, seq, worker, log, n_bin):
                        heapq.heappush(heap, (child.lower_bound, -child.depth, next(order), child))
                if limit_hit:
                    break
        finally:
            if executor is not None:
                executor.shutdown(wait=True)
            log.close()

        if limit_hit and heap:
            status = MinlpStatus.NODE_LIMIT
        elif self.incumbent_x is None:
            status = MinlpStatus.INFEASIBLE
        elif self.uncertified:
            status = MinlpStatus.FEASIBLE
        else:
            status = MinlpStatus.OPTIMAL_WITHIN_TREE

        assignment = (
            np.round(self.incumbent_x[self.integer_indices]) if self.incumbent_x is not None else np.zeros(0)
        )
        logger.info(
            "Branch-and-bound finished: %s, objective %s, %d nodes, %d NLP solves",
            status.value,
            f"{self.incumbent_objective:.8g}" if self.incumbent_x is not None else "none",
            solved,
            self.nlp_solves,
        )
        return MinlpSolution(
            x=self.incumbent_x,
            assignment=assignment,
            objective=self.incumbent_objective,
            status=status,
            incumbent_history=list(self.history),
            node_count=solved,
            nlp_solves=self.nlp_solves,
            runtime=time.perf_counter() - started,
            node_log=log.records,
        )

    def _record(
        self, seq: int, worker: int, node: BnbNode, status: str, objective: Optional[float], action: str
    ) -> Dict[str, Any]:
        return {
            "seq": seq,
            "worker": worker,
            "depth": node.depth,
            "fixings": {str(k): v for k, v in sorted(node.fixings.items())},
            "status": status,
            "objective": objective,
            "lower_bound": _finite(node.lower_bound),
            "action": action,
        }

    def _process(
        self, node: BnbNode, solution: NlpSolution, seq: int, worker: int, log: _NodeLog, n_bin: int
    ) -> List[BnbNode]:
        opts = self.options
        status = solution.status.value
        if solution.status != NlpStatus.OPTIMAL:
            free = [int(i) for i in self.integer_indices if int(i) not in node.fixings]
            if node.depth < n_bin and free:
                # local failure is not proof of infeasibility; keep exploring
                log.write(self._record(seq, worker, node, status, None, "branched"))
                index = next_unfixed_variable(node.fixings, free)
                return self._children(node, index, node.warm_start, node.lower_bound, seq)
            if solution.status != NlpStatus.LOCALLY_INFEASIBLE:
                self.uncertified = True
            log.write(self._record(seq, worker, node, status, None, "infeasible"))
            return []

        objective = float(solution.objective)
        if objective >= self.incumbent_objective - opts.prune_tol:
            log.write(self._record(seq, worker, node, status, objective, "pruned"))
            return []

        values = solution.x[self.integer_indices]
        frac = fractionality(values)
        if n_bin == 0 or frac.max() <= opts.fractional_tol:
            accepted = self._confirm(solution, node, seq)
            if accepted:
                log.write(self._record(seq, worker, node, status, objective, "incumbent"))
                return []
            free = [int(i) for i in self.integer_indices if int(i) not in node.fixings]
            if free:
                log.write(self._record(seq, worker, node, status, objective, "branched"))
                index = next_unfixed_variable(node.fixings, free)
                return self._children(node, index, solution.x, objective, seq)
            log.write(self._record(seq, worker, node, status, objective, "infeasible"))
            return []

        self._try_rounding(solution, seq)
        index = select_branch_variable(solution.x, self.integer_indices, opts.fractional_tol)
        if objective >= self.incumbent_objective - opts.prune_tol:
            log.write(self._record(seq, worker, node, status, objective, "pruned"))
            return []
        log.write(self._record(seq, worker, node, status, objective, "branched"))
        return self._children(node, index, solution.x, objective, seq)


def unpack_problem(problem, integer_indices):
    if isinstance(problem, TranscribedNlp):
        indices = problem.integer_indices if integer_indices is None else integer_indices
        return problem.nlp, np.asarray(indices, dtype=np.int64)
    if integer_indices is None:
        raise ConfigError("integer_indices are required for a plain NlpProblem")
    return problem, np.asarray(integer_indices, dtype=np.int64)


def solve_bnb(
    problem: Union[TranscribedNlp, NlpProblem],
    initial_guess: np.ndarray,
    options: Optional[BnbOptions] = None,
    integer_indices: Optional[Sequence[int]] = None,
    node_log: Union[None, str, Path, TextIO] = None,
) -> MinlpSolution:
    """
    Solve a MINLP by nonlinear branch-and-bound.

    Args:
        problem: Transcribed problem (binaries from its integrality marks)
            or a plain NlpProblem together with ``integer_indices``
        initial_guess: Starting point of the root relaxation
        options: Branch-and-bound options
        integer_indices: Binary variable indices (overrides the marks)
        node_log: Optional path or stream receiving one JSON line per node

    Returns:
        MinlpSolution
    """
    nlp, indices = unpack_problem(problem, integer_indices)
    return BranchAndBound(nlp, indices, options).run(initial_guess, node_log)
