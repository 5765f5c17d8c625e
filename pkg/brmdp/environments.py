"""
Benchmark environments: inventory control and the 3x9 maze.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import ConfigurationError
from .model import Environment, GeometricFamily, ParameterSpace, PoissonFamily, TruncatedNormalFamily

DEFAULT_DEMAND_ATOMS = (1.2, 1.6, 2.0, 2.4, 2.8)

UP, DOWN, LEFT, RIGHT, STAY = 0, 1, 2, 3, 4
ACTION_NAMES = {UP: "up", DOWN: "down", LEFT: "left", RIGHT: "right", STAY: "stay"}
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

# Four walls of shaky cells, alternately open at the bottom and the top row.
DEFAULT_SHAKY = ((0, 1), (1, 1), (1, 3), (2, 3), (0, 5), (1, 5), (1, 7), (2, 7))
DEFAULT_WHITE_ROUTE = 18
UNCERTAIN_TRANSITION = "uncertain-transition"
UNCERTAIN_COST = "uncertain-cost"


@dataclass(frozen=True)
class InventoryConfig:
    """
    Single-item inventory control.

    Attributes:
        capacity (int): Storage capacity S
        horizon (int or float): Number of stages, ``math.inf`` for infinite horizon
        initial_level (int): Starting inventory s_0
        holding (float): Holding cost per unit left over (h)
        penalty (float): Penalty per unit of unmet demand (p)
        order (float): Purchase cost per unit ordered (c)
        gamma (float): Discount factor
    """

    capacity: int = 3
    horizon: float = 7
    initial_level: int = 1
    holding: float = 4.0
    penalty: float = 4.0
    order: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 0:
            raise ConfigurationError("inventory capacity must be a non-negative integer, got %r" % (self.capacity,))
        if not 0 <= self.initial_level <= self.capacity:
            raise ConfigurationError("initial inventory %r is outside 0..%d" % (self.initial_level, self.capacity))
        for name in ("holding", "penalty", "order"):
            if getattr(self, name) < 0:
                raise ConfigurationError("inventory %s cost must be non-negative" % name)


class InventoryEnvironment(Environment):
    """
    Inventory levels 0..S; ordering ``a`` units at level ``s`` against demand ``xi`` gives
    ``s' = max(s + a - xi, 0)`` and cost ``h max(s + a - xi, 0) + p max(xi - s - a, 0) + c a``.
    """

    name = "inventory"

    def __init__(self, config, family):
        super().__init__(config.capacity + 1, family, config.horizon, config.gamma,
                         initial_state=config.initial_level)
        self.config = config
        self._actions = [tuple(range(config.capacity - s + 1)) for s in range(config.capacity + 1)]
        if family.space.is_finite:
            self.cost_bound = self.sweep_cost_bound(family.space.atoms)

    def actions(self, state):
        return self._actions[state]

    def next_state(self, state, action, xi):
        return np.maximum(state + action - np.asarray(xi, dtype=float), 0).astype(np.int64)

    def cost(self, state, action, xi):
        stock = state + action - np.asarray(xi, dtype=float)
        cfg = self.config
        return cfg.holding * np.maximum(stock, 0) + cfg.penalty * np.maximum(-stock, 0) + cfg.order * action


def build_inventory(config=None, family=None):
    """
    Build the inventory environment.

    Args:
        config (InventoryConfig, optional): Parameters, the default instance when omitted
        family (ParametricFamily, optional): Demand model, Poisson over the
            default atoms when omitted

    Returns:
        InventoryEnvironment: The environment
    """
    config = config or InventoryConfig()
    family = family or PoissonFamily(ParameterSpace.finite(DEFAULT_DEMAND_ATOMS))
    return InventoryEnvironment(config, family)


@dataclass(frozen=True)
class MazeConfig:
    """
    The maze grid.

    Attributes:
        rows (int): Grid height
        cols (int): Grid width
        shaky (tuple): ``(row, col)`` cells whose traversal time is random
        start (tuple): Start cell
        exit (tuple): Exit cell; entering it ends the episode
        horizon (int): Stage cap T_max
        gamma (float): Discount factor
        variant (str): ``uncertain-transition`` (geometric traversal time) or
            ``uncertain-cost`` (user-given family, truncated normal by default)
    """

    rows: int = 3
    cols: int = 9
    shaky: tuple = DEFAULT_SHAKY
    start: tuple = (0, 0)
    exit: tuple = (2, 8)
    horizon: int = 40
    gamma: float = 1.0
    variant: str = UNCERTAIN_TRANSITION

    def __post_init__(self):
        object.__setattr__(self, "shaky", tuple(sorted(tuple(int(v) for v in cell) for cell in self.shaky)))
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "exit", tuple(int(v) for v in self.exit))
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("maze needs a positive grid size")
        for cell in (self.start, self.exit) + self.shaky:
            if not (0 <= cell[0] < self.rows and 0 <= cell[1] < self.cols):
                raise ConfigurationError("maze cell %s is out of bounds" % (cell,))
        if len(set(self.shaky)) != len(self.shaky):
            raise ConfigurationError("shaky mask lists a cell twice")
        if self.exit in self.shaky:
            raise ConfigurationError("the exit cell cannot be shaky")
        if self.variant not in (UNCERTAIN_TRANSITION, UNCERTAIN_COST):
            raise ConfigurationError("unknown maze variant %r" % (self.variant,))


class MazeEnvironment(Environment):
    """
    Cells ``r * cols + c`` plus an absorbing exit state.

    Leaving a white cell takes one unit of time; leaving a shaky cell takes
    ``xi``. Moves are deterministic and only transitions out of shaky cells
    update the posterior. Entering the exit cell moves to the exit state,
    whose only action is ``STAY`` at zero cost.
    """

    name = "maze"

    def __init__(self, config, family):
        cells = config.rows * config.cols
        super().__init__(cells + 1, family, config.horizon, config.gamma, initial_state=0)
        self.config = config
        self.exit_state = cells
        self.initial_state = self.encode(config.start)
        self.shaky = np.zeros(self.num_states, dtype=bool)
        for cell in config.shaky:
            self.shaky[self.encode(cell)] = True
        self._targets = {}
        self._actions = []
        exit_cell = self.encode(config.exit)
        for state in range(self.num_states):
            if state in (self.exit_state, exit_cell):
                self._actions.append((STAY,))
                self._targets[state, STAY] = self.exit_state
                continue
            row, col = self.decode(state)
            moves = []
            for action, (dr, dc) in MOVES.items():
                if 0 <= row + dr < config.rows and 0 <= col + dc < config.cols:
                    target = self.encode((row + dr, col + dc))
                    self._targets[state, action] = self.exit_state if target == exit_cell else target
                    moves.append(action)
            self._actions.append(tuple(moves))
        self._shaky_floor = family.mean_lower_bound()
        self._bounds = self._remaining_cost_bounds() if self.finite_horizon else None

    def encode(self, domain_state):
        if domain_state == "exit":
            return self.exit_state
        row, col = domain_state
        return int(row) * self.config.cols + int(col)

    def decode(self, state):
        if state == self.exit_state:
            return "exit"
        return divmod(int(state), self.config.cols)

    def actions(self, state):
        return self._actions[state]

    def observes(self, state, action):
        return bool(self.shaky[state])

    def next_state(self, state, action, xi):
        return np.full(np.shape(xi), self._targets[state, action], dtype=np.int64)

    def cost(self, state, action, xi):
        xi = np.asarray(xi, dtype=float)
        if state == self.exit_state or action == STAY:
            return np.zeros(xi.shape)
        if self.shaky[state]:
            return xi.copy()
        return np.ones(xi.shape)

    def _stage_floor(self, state):
        if state == self.exit_state or self._actions[state] == (STAY,):
            return 0.0
        return self._shaky_floor if self.shaky[state] else 1.0

    def _remaining_cost_bounds(self):
        bounds = np.zeros((self.horizon + 1, self.num_states))
        floors = np.array([self._stage_floor(s) for s in range(self.num_states)])
        for steps in range(1, self.horizon + 1):
            for state in range(self.num_states):
                bounds[steps, state] = floors[state] + self.gamma * min(
                    bounds[steps - 1, self._targets[state, a]] for a in self._actions[state])
        return bounds

    def action_lower_bound(self, steps_remaining, state, action):
        """Stage-cost floor plus the cheapest deterministic continuation, valid for every belief."""
        if self._bounds is None:
            return -math.inf
        return self._stage_floor(state) + self.gamma * self._bounds[steps_remaining - 1, self._targets[state, action]]


def shortest_route(config, shaky_cost=math.inf):
    """
    Cheapest time from start to exit when every shaky cell costs ``shaky_cost``.

    Args:
        config (MazeConfig): Maze layout
        shaky_cost (float): Time to leave a shaky cell; ``inf`` forbids them

    Returns:
        float: Route cost, ``inf`` when the exit is unreachable
    """
    cells = config.rows * config.cols
    shaky = set(config.shaky)
    rows, cols, weights = [], [], []
    for r in range(config.rows):
        for c in range(config.cols):
            if (r, c) == config.exit:
                continue
            weight = shaky_cost if (r, c) in shaky else 1.0
            if not math.isfinite(weight):
                continue
            for dr, dc in MOVES.values():
                if 0 <= r + dr < config.rows and 0 <= c + dc < config.cols:
                    rows.append(r * config.cols + c)
                    cols.append((r + dr) * config.cols + c + dc)
                    weights.append(weight)
    graph = csr_matrix((weights, (rows, cols)), shape=(cells, cells))
    distances = dijkstra(graph, directed=True, indices=config.start[0] * config.cols + config.start[1])
    return float(distances[config.exit[0] * config.cols + config.exit[1]])


def check_default_layout(config):
    """
    Check the properties the default shaky mask is built for.

    Raises:
        ConfigurationError: If the all-white route is not 18 long or no
            strictly shorter route through shaky cells exists
    """
    white = shortest_route(config)
    unrestricted = shortest_route(config, shaky_cost=1.0)
    if white != DEFAULT_WHITE_ROUTE or not unrestricted < white:
        raise ConfigurationError("default maze layout broken: white route %g, unrestricted route %g"
                                 % (white, unrestricted))


def default_maze_family(variant):
    """Geometric traversal over the finite default atoms, or truncated normal over theta >= 1."""
    if variant == UNCERTAIN_TRANSITION:
        return GeometricFamily(ParameterSpace.finite((1 / 5.5, 1 / 5.0, 1 / 4.5)))
    return TruncatedNormalFamily(ParameterSpace.continuous(1.0), stddev=2.0, lower=1.0)


def build_maze(config=None, family=None):
    """
    Build the maze environment.

    Args:
        config (MazeConfig, optional): Layout, the default maze when omitted
        family (ParametricFamily, optional): Shaky-cell time model, the
            variant's default when omitted

    Returns:
        MazeEnvironment: The environment

    Raises:
        ConfigurationError: If the mask is invalid or the default layout fails its checks
    """
    config = config or MazeConfig()
    default_layout = MazeConfig()
    if (config.shaky, config.rows, config.cols, config.start, config.exit) == (
            default_layout.shaky, default_layout.rows, default_layout.cols, default_layout.start, default_layout.exit):
        check_default_layout(config)
    return MazeEnvironment(config, family or default_maze_family(config.variant))
