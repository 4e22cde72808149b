"""Stage 2: per-provider weighted greedy composition of skyway services.

One provider's swarm is walked from the request source toward the destination.
At every node the swarm first checks whether it can fly the whole remaining
shortest path on its current charge; if so it commits to that path. Otherwise
it moves to the unvisited neighbour with the best weighted incremental QoS
value. Charging happens at the departure node whenever some drone cannot
afford the next leg: non-cooperative swarms then refill to full (and top up
opportunistically when passing their partner's uncongested stations), while
cooperative swarms buy only what the remaining route needs plus a margin. A
dynamic swarm splits once, at the first congested decision node, into two
sub-swarms that continue independently and must arrive within a bounded time
window.

All mutable state is confined to per-provider copies; network, configs and
seeds are shared read-only, so providers can compose in parallel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from .config import CompositionConfig, EnergyModelConfig, Seeds, mix64
from .domain import (
    FORMATIONS,
    DeliveryRequest,
    Formation,
    Provider,
    QosVector,
    Swarm,
    assign_packages,
)
from .energy import (
    NodeService,
    WindField,
    best_formation,
    cooperative_target,
    execution_time_proxy,
    node_service_time,
    queue_length,
    relative_sector,
    segment_energy,
)
from .network import SkywayNetwork, shortest_path_tree, tree_path

_EPS = 1e-9


@dataclass
class DroneState:
    """Mutable per-composition copy of one drone, tracking its energy ledger."""

    drone_id: int
    battery_capacity: float
    payload_capacity: float
    speed: float
    current_energy: float
    assigned_payload: float
    initial_energy: float
    consumed: float = 0.0
    purchased: float = 0.0


@dataclass
class SubSwarmState:
    """One (sub-)swarm walking the network; a provider starts with exactly one."""

    drones: list[DroneState]
    path: list[int]
    visited: set[int]
    travel_s: float = 0.0
    charge_s: float = 0.0
    wait_s: float = 0.0
    cost: float = 0.0
    plan: deque[int] | None = None
    success: bool | None = None

    @property
    def delivery_time(self) -> float:
        return self.travel_s + self.charge_s + self.wait_s

    @property
    def current_node(self) -> int:
        return self.path[-1]


@dataclass
class CompositionContext:
    """Shared read-only inputs plus the evaluation counter for one composition."""

    network: SkywayNetwork
    request: DeliveryRequest
    provider: Provider
    energy: EnergyModelConfig
    comp: CompositionConfig
    wind: WindField
    congestion_seed: int
    dist_to_dest: Mapping[int, float]
    parent_to_dest: Mapping[int, int | None]
    dynamic: bool
    flexible: bool
    cooperative: bool
    base_formation: Formation
    evaluations: int = 0
    split_done: bool = False


@dataclass(frozen=True)
class _Leg:
    node: int
    length: float
    formation: Formation
    sector: int
    energies: tuple[float, ...]


@dataclass(frozen=True)
class CompositionOutcome:
    """Result of composing one provider for one request."""

    provider_id: int
    success: bool
    paths: tuple[tuple[int, ...], ...]  # node sequence per sub-swarm
    pqos: QosVector
    evaluations: int
    arrival_spread_s: float
    travel_s: float
    charge_s: float
    wait_s: float
    # per drone: (drone_id, initial_energy, consumed, purchased, final_energy)
    energy_ledger: tuple[tuple[int, float, float, float, float], ...]


def prepare_composition(
    provider: Provider,
    request: DeliveryRequest,
    network: SkywayNetwork,
    energy_config: EnergyModelConfig | None = None,
    seeds: Seeds | None = None,
    comp_config: CompositionConfig | None = None,
    dest_tree: tuple[Mapping[int, float], Mapping[int, int | None]] | None = None,
) -> tuple[SubSwarmState, CompositionContext]:
    """Build the initial sub-swarm (packages assigned) and composition context."""
    energy_config = energy_config or EnergyModelConfig()
    comp_config = comp_config or CompositionConfig()
    seeds = seeds or Seeds.from_master(0)
    for endpoint in (request.source, request.destination):
        if endpoint not in network.nodes:
            raise ValueError(f"request endpoint {endpoint} is not a network node")
    swarm = assign_packages(provider.swarm, request.packages)
    # one package per drone: drones without a package would fly empty, so only
    # the loaded ones are dispatched for the request
    dispatched = [d for d in swarm.drones if d.assigned_payload > 0] or [swarm.drones[0]]
    dist, parent = dest_tree if dest_tree is not None else shortest_path_tree(network, request.destination)
    ctx = CompositionContext(
        network=network,
        request=request,
        provider=provider,
        energy=energy_config,
        comp=comp_config,
        wind=WindField.from_config(seeds.wind, energy_config),
        congestion_seed=mix64(seeds.congestion, request.request_id),
        dist_to_dest=dist,
        parent_to_dest=parent,
        dynamic=swarm.is_dynamic,
        flexible=swarm.is_flexible,
        cooperative=swarm.is_cooperative,
        base_formation=swarm.formation,
    )
    state = SubSwarmState(
        drones=[
            DroneState(
                drone_id=d.drone_id,
                battery_capacity=d.battery_capacity,
                payload_capacity=d.payload_capacity,
                speed=d.speed,
                current_energy=d.current_energy,
                assigned_payload=d.assigned_payload,
                initial_energy=d.current_energy,
            )
            for d in dispatched
        ],
        path=[request.source],
        visited={request.source},
    )
    return state, ctx


def _leg_info(state: SubSwarmState, a: int, b: int, ctx: CompositionContext) -> _Leg:
    length = ctx.network.length(a, b)
    wind = ctx.wind.at(a, b, state.delivery_time)
    sector = relative_sector(wind.direction, ctx.network.heading(a, b))
    formation = (
        best_formation(sector, FORMATIONS, ctx.energy) if ctx.flexible else ctx.base_formation
    )
    energies = tuple(
        segment_energy(d, length, formation, sector, slot, ctx.energy)
        for slot, d in enumerate(state.drones)
    )
    ctx.evaluations += len(state.drones)
    return _Leg(node=b, length=length, formation=formation, sector=sector, energies=energies)


def _leg_within_capacity(state: SubSwarmState, leg: _Leg) -> bool:
    return all(e <= d.battery_capacity + _EPS for d, e in zip(state.drones, leg.energies))


def _charge_targets(state: SubSwarmState, leg: _Leg, ctx: CompositionContext) -> list[float]:
    """Per-drone charge targets before flying the leg, following the swarm's policy.

    Cooperative swarms buy what the remaining route ahead needs (estimated from
    the shortest-path distance, capped at capacity) plus margin, instead of
    refilling fully; they stop roughly as rarely as everyone else but never
    carry a full tank across the finish line.
    """
    if not ctx.cooperative:
        return [d.battery_capacity for d in state.drones]
    remaining_m = ctx.dist_to_dest.get(state.current_node)
    targets = []
    for drone, leg_energy in zip(state.drones, leg.energies):
        if remaining_m is None:
            need = leg_energy
        else:
            power_w = (
                ctx.energy.base_power_w
                + ctx.energy.payload_power_coeff_w_per_kg * drone.assigned_payload
            )
            route_estimate = power_w * (remaining_m / drone.speed) / 3600.0
            need = max(leg_energy, route_estimate)
        target = cooperative_target(drone, min(drone.battery_capacity, need), ctx.energy)
        targets.append(max(drone.current_energy, target))
    return targets


def _apply_service(state: SubSwarmState, node_id: int, targets: Sequence[float], ctx: CompositionContext) -> NodeService:
    service = node_service_time(
        state.drones,
        ctx.network.node(node_id),
        targets,
        ctx.provider.partnership,
        ctx.congestion_seed,
        ctx.energy,
    )
    ctx.evaluations += len(state.drones)
    state.charge_s += service.charge_s
    state.wait_s += service.wait_s
    state.cost += service.cost
    for drone, target in zip(state.drones, targets):
        bought = max(0.0, target - drone.current_energy)
        if bought > 0:
            drone.purchased += bought
            drone.current_energy = target
    return service


def _traverse(state: SubSwarmState, leg: _Leg, ctx: CompositionContext) -> bool:
    """Charge as needed at the current node, then fly the leg.

    A charging stop happens exactly when some drone cannot afford the leg; the
    amount bought follows the swarm's policy (see _charge_targets). Returns
    False when the leg is infeasible outright.
    """
    if not _leg_within_capacity(state, leg):
        state.success = False
        return False
    if any(d.current_energy < e - _EPS for d, e in zip(state.drones, leg.energies)):
        _apply_service(state, state.current_node, _charge_targets(state, leg, ctx), ctx)
    for drone, e in zip(state.drones, leg.energies):
        drone.current_energy = max(0.0, drone.current_energy - e)
        drone.consumed += e
    state.travel_s += leg.length / state.drones[0].speed
    state.cost += ctx.comp.operating_cost_per_km * leg.length / 1000.0
    state.path.append(leg.node)
    state.visited.add(leg.node)
    # opportunistic top-up at the partner's own stations, placing stops at
    # priority pads instead of wherever the battery would run dry; only worth
    # it when the swarm's priority walks it straight onto a pad
    threshold = ctx.comp.opportunistic_charge_threshold
    node = ctx.network.node(leg.node)
    if (
        not ctx.cooperative
        and threshold > 0
        and leg.node != ctx.request.destination
        and node.station_owner == ctx.provider.partnership.charging_provider_id
        and any(d.current_energy < threshold * d.battery_capacity for d in state.drones)
    ):
        q = queue_length(ctx.congestion_seed, leg.node, ctx.energy)
        if ctx.provider.partnership.queue_ahead(q, node.station_owner) == 0:
            _apply_service(state, leg.node, [d.battery_capacity for d in state.drones], ctx)
    return True


def _remaining_path_energiable(state: SubSwarmState, path_nodes: Sequence[int], ctx: CompositionContext) -> bool:
    """Whether every drone can fly all of path_nodes on its current charge."""
    totals = [0.0] * len(state.drones)
    for a, b in zip(path_nodes, path_nodes[1:]):
        leg = _leg_info(state, a, b, ctx)
        for i, (drone, e) in enumerate(zip(state.drones, leg.energies)):
            totals[i] += e
            if totals[i] > drone.current_energy + _EPS:
                return False
    return True


def can_reach_directly(
    swarm: Swarm,
    current_node: int,
    destination: int,
    network: SkywayNetwork,
    energy_config: EnergyModelConfig | None = None,
    wind_field: WindField | None = None,
    elapsed_s: float = 0.0,
) -> bool:
    """True when all drones can fly the distance-shortest path to the destination
    on their current charge, with no recharging stop."""
    energy_config = energy_config or EnergyModelConfig()
    wind_field = wind_field or WindField.from_config(0, energy_config)
    dist, parent = shortest_path_tree(network, destination)
    if current_node not in dist:
        return False
    path = tree_path(parent, current_node)
    totals = [0.0] * swarm.size
    for a, b in zip(path, path[1:]):
        length = network.length(a, b)
        wind = wind_field.at(a, b, elapsed_s)
        sector = relative_sector(wind.direction, network.heading(a, b))
        formation = (
            best_formation(sector, FORMATIONS, energy_config) if swarm.is_flexible else swarm.formation
        )
        for i, drone in enumerate(swarm.drones):
            totals[i] += segment_energy(drone, length, formation, sector, i, energy_config)
            if totals[i] > drone.current_energy + _EPS:
                return False
    return True


def _direct_ok(state: SubSwarmState, ctx: CompositionContext) -> bool:
    if state.current_node not in ctx.dist_to_dest:
        return False
    path = tree_path(ctx.parent_to_dest, state.current_node)
    return _remaining_path_energiable(state, path, ctx)


def _alive_toward_destination(state: SubSwarmState, ctx: CompositionContext) -> set[int]:
    """Unvisited nodes from which the destination is still reachable through
    unvisited nodes. Moving anywhere else can never complete the delivery."""
    seen = {ctx.request.destination}
    stack = [ctx.request.destination]
    while stack:
        node = stack.pop()
        for nbr, _ in ctx.network.neighbors(node):
            if nbr not in seen and nbr not in state.visited:
                seen.add(nbr)
                stack.append(nbr)
    return seen


def viable_candidates(state: SubSwarmState, ctx: CompositionContext) -> list[_Leg]:
    """Unvisited neighbours whose leg every drone can fly on a full battery and
    from which the destination remains reachable."""
    alive = _alive_toward_destination(state, ctx)
    out = []
    for nbr, _length in ctx.network.neighbors(state.current_node):
        if nbr in state.visited or nbr not in alive:
            continue
        leg = _leg_info(state, state.current_node, nbr, ctx)
        if _leg_within_capacity(state, leg):
            out.append(leg)
    return out


def _estimate_departure_service(state: SubSwarmState, leg: _Leg, ctx: CompositionContext) -> NodeService:
    """Exact prediction of the charge incurred at the current node to fly the leg."""
    if all(d.current_energy >= e - _EPS for d, e in zip(state.drones, leg.energies)):
        return NodeService(0.0, 0.0, 0.0, 0.0)
    probes = [
        DroneState(
            drone_id=d.drone_id,
            battery_capacity=d.battery_capacity,
            payload_capacity=d.payload_capacity,
            speed=d.speed,
            current_energy=d.current_energy,
            assigned_payload=d.assigned_payload,
            initial_energy=d.initial_energy,
        )
        for d in state.drones
    ]
    ctx.evaluations += len(state.drones)
    return node_service_time(
        probes,
        ctx.network.node(state.current_node),
        _charge_targets(state, leg, ctx),
        ctx.provider.partnership,
        ctx.congestion_seed,
        ctx.energy,
        queue_override=ctx.energy.queue_draw_max // 2,
    )


def _estimate_arrival_service(state: SubSwarmState, leg: _Leg, ctx: CompositionContext) -> NodeService:
    """Expected charging overhead at the candidate node.

    A stop is predicted there when the onward leg (approximated by the incoming
    one) would be unaffordable, or when a non-cooperative swarm would top up at
    its partner's station. The estimate prices only what actually differs
    between stations, the queue wait (at the expected queue length) and the
    energy price; charging time itself is excluded because the total energy a
    route buys, and hence the time on pads, barely depends on where the stops
    fall. The destination never charges.
    """
    if leg.node == ctx.request.destination:
        return NodeService(0.0, 0.0, 0.0, 0.0)
    node = ctx.network.node(leg.node)
    partnership = ctx.provider.partnership
    post = [max(0.0, d.current_energy - e) for d, e in zip(state.drones, leg.energies)]
    must_charge = any(p < e - _EPS for p, e in zip(post, leg.energies))
    expected_q = ctx.energy.queue_draw_max // 2
    threshold = ctx.comp.opportunistic_charge_threshold
    would_top_up = (
        not ctx.cooperative
        and threshold > 0
        and node.station_owner == partnership.charging_provider_id
        and partnership.queue_ahead(expected_q, node.station_owner) == 0
        and any(p < threshold * d.battery_capacity for d, p in zip(state.drones, post))
    )
    if not (must_charge or would_top_up):
        return NodeService(0.0, 0.0, 0.0, 0.0)
    probes = [
        DroneState(
            drone_id=d.drone_id,
            battery_capacity=d.battery_capacity,
            payload_capacity=d.payload_capacity,
            speed=d.speed,
            current_energy=p,
            assigned_payload=d.assigned_payload,
            initial_energy=d.initial_energy,
        )
        for d, p in zip(state.drones, post)
    ]
    if ctx.cooperative:
        targets = [
            max(p, min(d.battery_capacity, e * (1.0 + ctx.energy.cooperative_margin)))
            for d, p, e in zip(state.drones, post, leg.energies)
        ]
    else:
        targets = [d.battery_capacity for d in state.drones]
    ctx.evaluations += len(state.drones)
    service = node_service_time(
        probes,
        node,
        targets,
        partnership,
        ctx.congestion_seed,
        ctx.energy,
        queue_override=expected_q,
    )
    return NodeService(0.0, service.wait_s, service.energy_wh, service.cost)


def _oriented_normalize(values: Sequence[float]) -> list[float]:
    """Min-max normalize lower-is-better values so that higher means better."""
    lo, hi = min(values), max(values)
    span = hi - lo
    if span <= 1e-12:
        return [1.0] * len(values)
    return [(hi - v) / span for v in values]


def score_candidates(
    state: SubSwarmState, candidates: Sequence[_Leg], ctx: CompositionContext
) -> list[tuple[float, _Leg]]:
    """Weighted incremental QoS value per candidate, best first.

    For each candidate the perceived deltas are: delivery time (travel plus the
    departure charge this move forces plus the estimated charge at the candidate),
    flight energy, cost (operating cost plus charging cost) and a constant
    execution-time tick. Deltas are min-max normalized across the candidate set,
    oriented so higher is better, weighted by the consumer preferences, and a
    normalized remaining-distance criterion is mixed in with progress_weight.
    """
    if not candidates:
        return []
    dt_col, ec_col, cost_col, rem_col = [], [], [], []
    for leg in candidates:
        depart = _estimate_departure_service(state, leg, ctx)
        arrive = _estimate_arrival_service(state, leg, ctx)
        travel = leg.length / state.drones[0].speed
        dt_col.append(depart.charge_s + depart.wait_s + travel + arrive.charge_s + arrive.wait_s)
        ec_col.append(sum(leg.energies))
        cost_col.append(
            depart.cost + arrive.cost + ctx.comp.operating_cost_per_km * leg.length / 1000.0
        )
        rem_col.append(ctx.dist_to_dest.get(leg.node, float("inf")))
    ctx.evaluations += len(candidates)

    dt_hat = _oriented_normalize(dt_col)
    ec_hat = _oriented_normalize(ec_col)
    cost_hat = _oriented_normalize(cost_col)
    et_hat = [1.0] * len(candidates)  # the proxy tick is identical for every candidate
    rem_hat = _oriented_normalize(rem_col)

    weights = ctx.request.qos_weights
    pw = ctx.comp.progress_weight
    scored = []
    for i, leg in enumerate(candidates):
        qos_value = (
            weights["delivery_time"] * dt_hat[i]
            + weights["energy"] * ec_hat[i]
            + weights["cost"] * cost_hat[i]
            + weights["execution_time"] * et_hat[i]
        )
        value = (1.0 - pw) * qos_value + pw * rem_hat[i]
        scored.append((value, leg))
    scored.sort(key=lambda pair: (-pair[0], pair[1].node))
    return scored


def node_value(
    candidate_node: int,
    state: SubSwarmState,
    request: DeliveryRequest,
    ctx: CompositionContext,
) -> float:
    """Weighted incremental QoS value of moving to one candidate neighbour."""
    if request != ctx.request:
        raise ValueError("request does not match the composition context")
    candidates = viable_candidates(state, ctx)
    for value, leg in score_candidates(state, candidates, ctx):
        if leg.node == candidate_node:
            return value
    raise ValueError(f"node {candidate_node} is not a viable candidate")


def _split_subswarm(state: SubSwarmState) -> SubSwarmState:
    """Split drones (with their packages) as evenly as possible; returns the sibling."""
    half = (len(state.drones) + 1) // 2
    sibling = SubSwarmState(
        drones=state.drones[half:],
        path=list(state.path),
        visited=set(state.visited),
        travel_s=state.travel_s,
        charge_s=state.charge_s,
        wait_s=state.wait_s,
        cost=0.0,  # shared history cost stays with the first sub-swarm
    )
    state.drones = state.drones[:half]
    return sibling


def _run_subswarm(state: SubSwarmState, ctx: CompositionContext, pending: list[SubSwarmState]) -> None:
    destination = ctx.request.destination
    while True:
        node = state.current_node
        if node == destination:
            state.success = True
            return

        if state.plan is not None:
            leg = _leg_info(state, node, state.plan.popleft(), ctx)
            if not _traverse(state, leg, ctx):
                return
            continue

        if (
            ctx.dynamic
            and not ctx.split_done
            and len(state.drones) >= 2
            and ctx.network.node(node).pad_count < len(state.drones)
        ):
            candidates = viable_candidates(state, ctx)
            if len(candidates) >= 2:
                ranked = score_candidates(state, candidates, ctx)
                first_target, second_target = ranked[0][1].node, ranked[1][1].node
                sibling = _split_subswarm(state)
                leg_a = _leg_info(state, node, first_target, ctx)
                leg_b = _leg_info(sibling, node, second_target, ctx)
                if _leg_within_capacity(state, leg_a) and _leg_within_capacity(sibling, leg_b):
                    ctx.split_done = True
                    moved = _traverse(state, leg_a, ctx)
                    _traverse(sibling, leg_b, ctx)
                    pending.append(sibling)
                    if not moved:
                        return
                    continue
                # fold the split back when a half cannot fly its leg at its new slots
                state.drones = state.drones + sibling.drones

        if _direct_ok(state, ctx):
            remaining = tree_path(ctx.parent_to_dest, node)
            state.plan = deque(remaining[1:])
            continue

        candidates = viable_candidates(state, ctx)
        if not candidates:
            state.success = False
            return
        ranked = score_candidates(state, candidates, ctx)
        if not _traverse(state, ranked[0][1], ctx):
            return


def compose(
    provider: Provider,
    request: DeliveryRequest,
    network: SkywayNetwork,
    energy_config: EnergyModelConfig | None = None,
    seeds: Seeds | None = None,
    comp_config: CompositionConfig | None = None,
    dest_tree: tuple[Mapping[int, float], Mapping[int, int | None]] | None = None,
) -> CompositionOutcome:
    """Compose the delivery path for one provider and accumulate its perceived QoS.

    Failure (no reachable unvisited neighbour, an infeasible leg, or sub-swarms
    missing the arrival window) is a normal outcome with success=False, not an
    error. The same provider, request, seeds and configs always produce a
    bitwise-identical outcome.
    """
    state, ctx = prepare_composition(
        provider, request, network, energy_config, seeds, comp_config, dest_tree
    )
    if request.source not in ctx.dist_to_dest:
        state.success = False
        finished = [state]
    else:
        queue = [state]
        finished = []
        while queue:
            sub = queue.pop(0)
            if sub.success is None:
                _run_subswarm(sub, ctx, queue)
            finished.append(sub)

    delivery_times = [s.delivery_time for s in finished]
    spread = max(delivery_times) - min(delivery_times) if len(finished) > 1 else 0.0
    success = all(s.success for s in finished)
    if success and len(finished) > 1 and spread > ctx.comp.arrival_window_s:
        success = False

    slowest = max(finished, key=lambda s: s.delivery_time)
    ledger = tuple(
        sorted(
            (
                (d.drone_id, d.initial_energy, d.consumed, d.purchased, d.current_energy)
                for s in finished
                for d in s.drones
            ),
            key=lambda row: row[0],
        )
    )
    pqos = QosVector(
        delivery_time=max(delivery_times),
        energy=sum(d.consumed for s in finished for d in s.drones),
        cost=sum(s.cost for s in finished),
        execution_time=execution_time_proxy(ctx.evaluations, provider.swarm.techniques, ctx.energy),
    )
    return CompositionOutcome(
        provider_id=provider.provider_id,
        success=success,
        paths=tuple(tuple(s.path) for s in finished),
        pqos=pqos,
        evaluations=ctx.evaluations,
        arrival_spread_s=spread,
        travel_s=slowest.travel_s,
        charge_s=slowest.charge_s,
        wait_s=slowest.wait_s,
        energy_ledger=ledger,
    )
