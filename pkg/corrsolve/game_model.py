"""Finite extensive-form games: tree representation, validation and the JSON game file format.

Players are numbered ``1..N``; chance is ``0`` in memory and ``"chance"`` in game files.
Leaves have no owner. Node ids are dense and assigned in preorder (root = 0); information
sets are numbered by first appearance in preorder.
"""

import json
import logging
from typing import List, Dict, Any, Optional, Tuple, Hashable, Sequence
from dataclasses import dataclass, field


logger = logging.getLogger(__name__)

CHANCE = 0
PROB_TOL = 1e-12


class GameFormatError(ValueError):
    """Raised when a game file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class GameValidationError(ValueError):
    """Raised when a game violates a structural invariant."""

    def __init__(self, message: str, node: Optional[Hashable] = None,
                 infoset: Optional[Hashable] = None):
        self.node = node
        self.infoset = infoset
        if node is not None:
            message = f"node {node}: {message}"
        elif infoset is not None:
            message = f"infoset {infoset}: {message}"
        super().__init__(message)


class UnknownLeafError(KeyError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    owner: Optional[int]
    actions: Tuple[str, ...] = ()
    children: Tuple[int, ...] = ()
    chance_probs: Optional[Tuple[float, ...]] = None
    payoffs: Optional[Tuple[float, ...]] = None
    infoset: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return not self.actions

    @property
    def is_chance(self) -> bool:
        return not self.is_leaf and self.owner == CHANCE


@dataclass(frozen=True)
class InfoSet:
    id: int
    player: int
    members: Tuple[int, ...]
    actions: Tuple[str, ...]


@dataclass(frozen=True)
class GameTree:
    """Immutable game tree. Validated on construction; safe to share across threads."""
    num_players: int
    nodes: Tuple[Node, ...]
    infosets: Tuple[InfoSet, ...]
    root: int = 0
    parent: Tuple[Optional[int], ...] = field(init=False, compare=False, repr=False)
    parent_action: Tuple[Optional[int], ...] = field(init=False, compare=False, repr=False)
    leaves: Tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        """Check structural invariants and derive parent links and the leaf list."""
        if self.num_players < 2:
            raise GameValidationError(f"need at least 2 players, got {self.num_players}")

        for position, node in enumerate(self.nodes):
            if node.id != position:
                raise GameValidationError(f"id does not match position {position}", node=node.id)
            self._check_node(node)

        for position, infoset in enumerate(self.infosets):
            if infoset.id != position:
                raise GameValidationError("id does not match position", infoset=position)
            if not infoset.members:
                raise GameValidationError("no members", infoset=infoset.id)
            for member in infoset.members:
                if not 0 <= member < len(self.nodes) or self.nodes[member].infoset != infoset.id:
                    raise GameValidationError(f"member {member} not in this infoset",
                                              infoset=infoset.id)

        parent: List[Optional[int]] = [None] * len(self.nodes)
        parent_action: List[Optional[int]] = [None] * len(self.nodes)
        visited = [False] * len(self.nodes)
        leaves = []
        if not 0 <= self.root < len(self.nodes):
            raise GameValidationError(f"root {self.root} out of range")
        stack = [self.root]
        while stack:
            v = stack.pop()
            if visited[v]:
                raise GameValidationError("reached twice (not a tree)", node=v)
            visited[v] = True
            node = self.nodes[v]
            if node.is_leaf:
                leaves.append(v)
            for a, child in reversed(list(enumerate(node.children))):
                if not 0 <= child < len(self.nodes):
                    raise GameValidationError(f"child {child} out of range", node=v)
                parent[child] = v
                parent_action[child] = a
                stack.append(child)
        unreachable = [v for v, seen in enumerate(visited) if not seen]
        if unreachable:
            raise GameValidationError("unreachable from root", node=unreachable[0])

        object.__setattr__(self, "parent", tuple(parent))
        object.__setattr__(self, "parent_action", tuple(parent_action))
        object.__setattr__(self, "leaves", tuple(leaves))

    def _check_node(self, node: Node) -> None:
        if len(node.children) != len(node.actions):
            raise GameValidationError("actions and children differ in length", node=node.id)
        if len(set(node.actions)) != len(node.actions):
            raise GameValidationError("duplicate action labels", node=node.id)

        if node.is_leaf:
            if node.payoffs is None or len(node.payoffs) != self.num_players:
                raise GameValidationError(f"leaf needs {self.num_players} payoffs", node=node.id)
            if node.owner is not None or node.infoset is not None:
                raise GameValidationError("leaf with owner or infoset", node=node.id)
            return

        if node.payoffs is not None:
            raise GameValidationError("internal node with payoffs", node=node.id)
        if node.owner is None or not 0 <= node.owner <= self.num_players:
            raise GameValidationError(f"bad owner {node.owner}", node=node.id)

        if node.owner == CHANCE:
            check_chance_probs(node.chance_probs, len(node.actions), node.id)
            if node.infoset is not None:
                raise GameValidationError("chance node in an infoset", node=node.id)
            return

        if node.chance_probs is not None:
            raise GameValidationError("player node with chance probabilities", node=node.id)
        if node.infoset is None or not 0 <= node.infoset < len(self.infosets):
            raise GameValidationError(f"unknown infoset {node.infoset}", node=node.id)
        infoset = self.infosets[node.infoset]
        if infoset.player != node.owner:
            raise GameValidationError(f"owner differs from infoset {infoset.id}", node=node.id)
        if infoset.actions != node.actions:
            raise GameValidationError(f"actions differ from infoset {infoset.id}", node=node.id)
        if node.id not in infoset.members:
            raise GameValidationError(f"missing from infoset {infoset.id} members", node=node.id)

    @property
    def has_chance(self) -> bool:
        return any(node.is_chance for node in self.nodes)

    def infosets_of(self, player: int) -> List[int]:
        return [infoset.id for infoset in self.infosets if infoset.player == player]

    def payoff(self, z: int) -> Tuple[float, ...]:
        node = self.nodes[z]
        if not node.is_leaf:
            raise UnknownLeafError(z)
        return node.payoffs

    def path(self, v: int) -> List[Tuple[int, int]]:
        """(node, action index) pairs on the root path to v, root first."""
        steps = []
        while self.parent[v] is not None:
            steps.append((self.parent[v], self.parent_action[v]))
            v = self.parent[v]
        steps.reverse()
        return steps

    def node_at(self, labels: Sequence[str]) -> int:
        """Follow action labels from the root."""
        v = self.root
        for label in labels:
            node = self.nodes[v]
            if label not in node.actions:
                raise KeyError(f"no action '{label}' at node {v}")
            v = node.children[node.actions.index(label)]
        return v


@dataclass
class RecallViolation:
    infoset: int
    player: int
    message: str


@dataclass
class RecallReport:
    violations: List[RecallViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Optional[RecallViolation]:
        return self.violations[0] if self.violations else None


def validate_perfect_recall(game: GameTree) -> RecallReport:
    """Check that all members of every infoset share the owner's (infoset, action) history.

    Violations are listed in preorder discovery order, one per infoset.
    """
    report = RecallReport()
    seen: Dict[int, Tuple[Tuple[int, int], ...]] = {}
    flagged = set()
    stack: List[Tuple[int, Dict[int, Tuple[Tuple[int, int], ...]]]] = [(game.root, {})]
    while stack:
        v, history = stack.pop()
        node = game.nodes[v]
        if node.is_leaf:
            continue
        if not node.is_chance:
            own = history.get(node.owner, ())
            expected = seen.setdefault(node.infoset, own)
            if expected != own and node.infoset not in flagged:
                flagged.add(node.infoset)
                report.violations.append(RecallViolation(
                    infoset=node.infoset,
                    player=node.owner,
                    message=f"node {v} has history {list(own)}, another member has {list(expected)}",
                ))
        for a in reversed(range(len(node.actions))):
            child_history = history
            if not node.is_chance:
                child_history = dict(history)
                child_history[node.owner] = history.get(node.owner, ()) + ((node.infoset, a),)
            stack.append((node.children[a], child_history))

    if report.violations:
        logger.debug(f"Perfect recall violated at infoset {report.first.infoset}")
    return report


def leaf_payoff(game: GameTree, z: int, i: int) -> float:
    """Payoff u_i(z) of player i at leaf z."""
    if not 0 <= z < len(game.nodes) or not game.nodes[z].is_leaf:
        raise UnknownLeafError(f"unknown leaf {z}")
    if not 1 <= i <= game.num_players:
        raise ValueError(f"unknown player {i}")
    return game.nodes[z].payoffs[i - 1]


def check_chance_probs(probs: Optional[Sequence[float]], n_actions: int, name: Hashable) -> None:
    if probs is None or len(probs) != n_actions:
        raise GameValidationError("chance node needs one probability per action", node=name)
    if any(p < 0 for p in probs):
        raise GameValidationError("negative chance probability", node=name)
    total = sum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise GameValidationError(f"chance probabilities sum to {total:g}", node=name)


@dataclass
class _Proto:
    owner: Optional[int]
    key: Optional[Hashable] = None
    actions: Tuple[str, ...] = ()
    children: Tuple[int, ...] = ()
    probs: Optional[Tuple[float, ...]] = None
    payoffs: Optional[Tuple[float, ...]] = None


class GameBuilder:
    """Bottom-up game construction.

    Nodes are created children-first and referred to by handles; ``build`` renumbers them
    in preorder. Decision and chance nodes with a single action are replaced by their child.
    Infosets are identified by arbitrary hashable keys, scoped per player.
    """

    def __init__(self, num_players: int = 2):
        self.num_players = num_players
        self._protos: List[_Proto] = []

    def leaf(self, payoffs: Sequence[float]) -> int:
        if len(payoffs) != self.num_players:
            raise GameValidationError(f"leaf needs {self.num_players} payoffs")
        self._protos.append(_Proto(owner=None, payoffs=tuple(float(p) for p in payoffs)))
        return len(self._protos) - 1

    def decision(self, player: int, key: Hashable, actions: Sequence[str],
                 children: Sequence[int]) -> int:
        if not 1 <= player <= self.num_players:
            raise GameValidationError(f"unknown player {player}", infoset=key)
        if not actions or len(actions) != len(children):
            raise GameValidationError("need one child per action", infoset=key)
        if len(actions) == 1:
            return children[0]
        self._protos.append(_Proto(owner=player, key=(player, key),
                                   actions=tuple(actions), children=tuple(children)))
        return len(self._protos) - 1

    def chance(self, actions: Sequence[str], probs: Sequence[float], children: Sequence[int],
               name: Optional[Hashable] = None) -> int:
        if not actions or len(actions) != len(children):
            raise GameValidationError("need one child per action", node=name)
        check_chance_probs(probs, len(actions), name)
        if len(actions) == 1:
            return children[0]
        self._protos.append(_Proto(owner=CHANCE, actions=tuple(actions),
                                   children=tuple(children),
                                   probs=tuple(float(p) for p in probs)))
        return len(self._protos) - 1

    def build(self, root: int) -> GameTree:
        order: List[int] = []
        new_id: Dict[int, int] = {}
        stack = [root]
        while stack:
            handle = stack.pop()
            if handle in new_id:
                raise GameValidationError("node used twice", node=handle)
            new_id[handle] = len(order)
            order.append(handle)
            stack.extend(reversed(self._protos[handle].children))

        infoset_id: Dict[Hashable, int] = {}
        infoset_player: List[int] = []
        infoset_actions: List[Tuple[str, ...]] = []
        members: List[List[int]] = []
        nodes = []
        for handle in order:
            proto = self._protos[handle]
            infoset = None
            if proto.key is not None:
                if proto.key not in infoset_id:
                    infoset_id[proto.key] = len(infoset_player)
                    infoset_player.append(proto.owner)
                    infoset_actions.append(proto.actions)
                    members.append([])
                infoset = infoset_id[proto.key]
                if infoset_actions[infoset] != proto.actions:
                    raise GameValidationError(
                        f"members disagree on actions {infoset_actions[infoset]} vs {proto.actions}",
                        infoset=proto.key[1],
                    )
                members[infoset].append(new_id[handle])
            nodes.append(Node(
                id=new_id[handle],
                owner=proto.owner,
                actions=proto.actions,
                children=tuple(new_id[c] for c in proto.children),
                chance_probs=proto.probs,
                payoffs=proto.payoffs,
                infoset=infoset,
            ))

        infosets = tuple(
            InfoSet(id=k, player=infoset_player[k], members=tuple(members[k]),
                    actions=infoset_actions[k])
            for k in range(len(infoset_player))
        )
        return GameTree(num_players=self.num_players, nodes=tuple(nodes), infosets=infosets)


def collapse_forced_moves(game: GameTree) -> GameTree:
    """Rebuild the game without single-action nodes, renumbered in preorder."""
    builder = GameBuilder(game.num_players)

    def copy(v: int) -> int:
        node = game.nodes[v]
        if node.is_leaf:
            return builder.leaf(node.payoffs)
        children = [copy(c) for c in node.children]
        if node.is_chance:
            return builder.chance(node.actions, node.chance_probs, children, name=v)
        return builder.decision(node.owner, node.infoset, node.actions, children)

    return builder.build(copy(game.root))


def swap_players(game: GameTree) -> GameTree:
    """Exchange the roles of players 1 and 2 in a two-player game."""
    if game.num_players != 2:
        raise ValueError("swap_players needs a two-player game")
    other = {1: 2, 2: 1, CHANCE: CHANCE, None: None}
    nodes = tuple(
        Node(
            id=node.id,
            owner=other[node.owner],
            actions=node.actions,
            children=node.children,
            chance_probs=node.chance_probs,
            payoffs=None if node.payoffs is None else tuple(reversed(node.payoffs)),
            infoset=node.infoset,
        )
        for node in game.nodes
    )
    infosets = tuple(
        InfoSet(id=I.id, player=other[I.player], members=I.members, actions=I.actions)
        for I in game.infosets
    )
    return GameTree(num_players=2, nodes=nodes, infosets=infosets, root=game.root)


def save_game(game: GameTree) -> str:
    nodes = []
    for node in game.nodes:
        record: Dict[str, Any] = {"id": node.id}
        if node.is_leaf:
            record["owner"] = None
            record["payoffs"] = list(node.payoffs)
        else:
            record["owner"] = "chance" if node.is_chance else node.owner
            if node.infoset is not None:
                record["infoset"] = node.infoset
            record["actions"] = list(node.actions)
            record["children"] = list(node.children)
            if node.chance_probs is not None:
                record["chance_probs"] = list(node.chance_probs)
        nodes.append(record)

    document = {
        "players": game.num_players,
        "root": game.root,
        "nodes": nodes,
        "infosets": [
            {"id": I.id, "player": I.player, "members": list(I.members), "actions": list(I.actions)}
            for I in game.infosets
        ],
    }
    return json.dumps(document, indent=1)


def _require(record: Dict[str, Any], key: str, kind: type, where: str) -> Any:
    if key not in record:
        raise GameFormatError("missing field", field=f"{where}.{key}")
    value = record[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise GameFormatError(f"expected {kind.__name__}", field=f"{where}.{key}")
    return value


def load_game(text: str) -> GameTree:
    """Parse a game file, validate it, and collapse forced moves.

    Raises:
        GameFormatError: malformed JSON, missing fields, or dangling references.
        GameValidationError: a structural invariant or perfect recall fails.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise GameFormatError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    if not isinstance(document, dict):
        raise GameFormatError("top level must be an object")

    num_players = _require(document, "players", int, "game")
    root = _require(document, "root", int, "game")
    raw_nodes = _require(document, "nodes", list, "game")
    raw_infosets = _require(document, "infosets", list, "game")

    infosets: Dict[int, Dict[str, Any]] = {}
    for k, record in enumerate(raw_infosets):
        where = f"infosets[{k}]"
        if not isinstance(record, dict):
            raise GameFormatError("expected object", field=where)
        infoset_id = _require(record, "id", int, where)
        infosets[infoset_id] = {
            "player": _require(record, "player", int, where),
            "members": _require(record, "members", list, where),
            "actions": [str(a) for a in _require(record, "actions", list, where)],
        }

    nodes: Dict[int, Dict[str, Any]] = {}
    for k, record in enumerate(raw_nodes):
        where = f"nodes[{k}]"
        if not isinstance(record, dict):
            raise GameFormatError("expected object", field=where)
        node_id = _require(record, "id", int, where)
        if node_id in nodes:
            raise GameFormatError(f"duplicate node id {node_id}", field=f"{where}.id")
        actions = [str(a) for a in record.get("actions") or []]
        children = record.get("children") or []
        owner = record.get("owner")
        if owner == "chance":
            owner = CHANCE
        elif owner is not None and (not isinstance(owner, int) or isinstance(owner, bool)):
            raise GameFormatError(f"bad owner {owner!r}", field=f"{where}.owner")
        infoset = record.get("infoset")
        if infoset is not None and infoset not in infosets:
            raise GameFormatError(f"unknown infoset id {infoset}", field=f"{where}.infoset")
        nodes[node_id] = {
            "owner": owner,
            "actions": actions,
            "children": children,
            "chance_probs": record.get("chance_probs"),
            "payoffs": record.get("payoffs"),
            "infoset": infoset,
            "where": where,
        }

    for node_id, record in nodes.items():
        for child in record["children"]:
            if child not in nodes:
                raise GameFormatError(f"unknown child id {child}",
                                      field=f"{record['where']}.children")
    for infoset_id, record in infosets.items():
        for member in record["members"]:
            if member not in nodes or nodes[member]["infoset"] != infoset_id:
                raise GameValidationError(f"member {member} does not point back",
                                          infoset=infoset_id)
            if nodes[member]["owner"] != record["player"]:
                raise GameValidationError("owner differs from infoset player", node=member)
            if nodes[member]["actions"] != record["actions"]:
                raise GameValidationError("actions differ from infoset actions", node=member)
    if root not in nodes:
        raise GameFormatError(f"unknown root id {root}", field="game.root")

    builder = GameBuilder(num_players)
    on_path = set()
    copied = set()

    def copy(node_id: int) -> int:
        if node_id in on_path:
            raise GameValidationError("cycle through node", node=node_id)
        if node_id in copied:
            raise GameValidationError("reached twice (not a tree)", node=node_id)
        copied.add(node_id)
        record = nodes[node_id]
        if not record["actions"]:
            if record["payoffs"] is None:
                raise GameValidationError("leaf without payoffs", node=node_id)
            return builder.leaf(record["payoffs"])
        if len(record["children"]) != len(record["actions"]):
            raise GameValidationError("need one child per action", node=node_id)
        on_path.add(node_id)
        children = [copy(c) for c in record["children"]]
        on_path.discard(node_id)
        if record["owner"] == CHANCE:
            probs = record["chance_probs"]
            if probs is None:
                raise GameValidationError("chance node without probabilities", node=node_id)
            return builder.chance(record["actions"], probs, children, name=node_id)
        if record["owner"] is None or record["infoset"] is None:
            raise GameValidationError("decision node needs owner and infoset", node=node_id)
        return builder.decision(record["owner"], record["infoset"], record["actions"], children)

    game = builder.build(copy(root))
    report = validate_perfect_recall(game)
    if not report.ok:
        raise GameValidationError(f"perfect recall violated: {report.first.message}",
                                  infoset=report.first.infoset)

    logger.info(f"Loaded game: {len(game.nodes)} nodes, {len(game.leaves)} leaves, "
                f"{len(game.infosets)} infosets")
    return game
