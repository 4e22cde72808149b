"""Experiment harness: filter, prune, compose, recommend, score, aggregate.

Reproduces the paper-style experiments at desk scale: pruning-strategy
comparison, k-percent sweep and vote-count-system comparison. Every run is a
pure function of its config, and the emitted CSV bytes are identical across
repeat runs.

Satisfaction expectations are derived from the cohort the broker actually
composed and voted over (the pruned survivors), so a strategy is judged against
the field it offered the consumer. Each provider is composed once per request
and the outcome is reused by every strategy; a strategy's proxy time only
counts its own cohort's evaluations plus its scoring work.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .composition import CompositionOutcome, compose
from .config import CompositionConfig, EnergyModelConfig, Seeds, mix64
from .domain import (
    QOS_METRICS,
    CapabilityRanges,
    DeliveryRequest,
    Provider,
    ScenarioLimits,
    generate_scenario,
)
from .network import (
    SkywayNetwork,
    build_all_heatmaps,
    build_region_grid,
    load_network,
    load_network_dump,
    shortest_path_tree,
    synthetic_network,
)
from .pruning import STRATEGIES, NoFeasibleProviders, filter_providers, select_cohort
from .recommend import (
    VOTING_METHODS,
    borda,
    build_ballots,
    condorcet,
    instant_runoff,
    normalized_qos,
    plurality,
    satisfaction,
    top_weight,
)

_METHOD_SEED_INDEX = {name: i + 1 for i, name in enumerate(VOTING_METHODS)}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    synthetic_nodes: int | None = 100
    network_path: str | None = None
    edges_path: str | None = None
    coords_path: str | None = None
    stations_path: str | None = None
    charging_companies: int = 5
    area_m: float = 30000.0
    n_providers: int = 20
    n_requests: int = 50
    strategies: tuple[str, ...] = ("density",)
    k_values: tuple[float, ...] = (50.0,)
    t_paths: int = 3
    voting_methods: tuple[str, ...] = ("irv",)
    grid_resolution: int = 8
    limits: ScenarioLimits = field(
        default_factory=lambda: ScenarioLimits(max_packages=6, max_package_weight_kg=2.0)
    )
    ranges: CapabilityRanges = field(default_factory=CapabilityRanges)
    energy: EnergyModelConfig = field(default_factory=EnergyModelConfig)
    composition: CompositionConfig = field(default_factory=CompositionConfig)
    measure_wallclock: bool = False

    def __post_init__(self) -> None:
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise ValueError(f"unknown pruning strategy {strategy!r}")
        for method in self.voting_methods:
            if method not in VOTING_METHODS:
                raise ValueError(f"unknown voting method {method!r}")


PER_REQUEST_FIELDS = [
    "seed",
    "request_id",
    "strategy",
    "k_percent",
    "method",
    "winner",
    "cohort_size",
    "cohort_successes",
    "delivery_time",
    "energy",
    "cost",
    "execution_time",
    "satisfaction",
    *[f"nhat_{m}" for m in QOS_METRICS],
    *[f"w_{m}" for m in QOS_METRICS],
    "proxy_time",
    "recommend_ops",
    "paradox",
    "wall_s",
]

SUMMARY_FIELDS = [
    "seed",
    "strategy",
    "method",
    "k_percent",
    "requests_served",
    "mean_satisfaction",
    "std_satisfaction",
    "mean_proxy_time",
    "mean_recommend_ops",
    "failure_rate",
]


@dataclass
class ExperimentResult:
    rows: list[dict]
    summary: list[dict]
    trends: dict[str, float | None]
    manifest: dict


def build_network(cfg: ExperimentConfig) -> SkywayNetwork:
    if cfg.network_path:
        return load_network_dump(Path(cfg.network_path).read_text())
    if cfg.edges_path or cfg.coords_path or cfg.stations_path:
        if not (cfg.edges_path and cfg.coords_path and cfg.stations_path):
            raise ValueError("edge list, coords and stations files must be given together")
        with open(cfg.edges_path) as edges, open(cfg.coords_path) as coords, open(
            cfg.stations_path
        ) as stations:
            return load_network(edges, coords, stations)
    if cfg.synthetic_nodes:
        return synthetic_network(
            cfg.seed,
            cfg.synthetic_nodes,
            n_charging_providers=cfg.charging_companies,
            area_m=cfg.area_m,
        )
    raise ValueError("no network source configured")


def _run_method(
    method: str,
    ballots,
    successes: Sequence[CompositionOutcome],
    request: DeliveryRequest,
    seeds: Seeds,
) -> tuple[int, int, bool]:
    rng_seed = mix64(seeds.voting, request.request_id, _METHOD_SEED_INDEX[method])
    if method == "plurality":
        r = plurality(ballots)
    elif method == "irv":
        r = instant_runoff(ballots, rng_seed)
    elif method == "borda":
        r = borda(ballots)
    elif method == "condorcet":
        r = condorcet(ballots, rng_seed)
    elif method == "topweight":
        return top_weight(successes, request.qos_weights), len(successes), False
    else:
        raise ValueError(f"unknown voting method {method!r}")
    return r.winner, r.op_count, r.paradox


def _process_request(
    request: DeliveryRequest,
    providers: Sequence[Provider],
    network: SkywayNetwork,
    grid,
    heatmaps,
    seeds: Seeds,
    cfg: ExperimentConfig,
) -> tuple[list[dict], str]:
    try:
        filtered = filter_providers(providers, request)
    except NoFeasibleProviders:
        return [], "rejected"

    started = time.perf_counter()
    dest_tree = shortest_path_tree(network, request.destination)
    outcomes = {
        p.provider_id: compose(
            p, request, network, cfg.energy, seeds, cfg.composition, dest_tree
        )
        for p in filtered
    }
    wall_s = time.perf_counter() - started if cfg.measure_wallclock else 0.0

    if not any(o.success for o in outcomes.values()):
        return [], "unserved"

    rows = []
    for strategy in cfg.strategies:
        for k in cfg.k_values:
            cohort, scoring_ops = select_cohort(
                strategy, filtered, request, grid, heatmaps, cfg.t_paths, k
            )
            cohort_outcomes = [outcomes[p.provider_id] for p in cohort]
            successes = [o for o in cohort_outcomes if o.success]
            proxy = scoring_ops + sum(o.evaluations for o in cohort_outcomes)
            if not successes:
                continue
            cohort_pqos = {o.provider_id: o.pqos for o in successes}
            sat_table = satisfaction(cohort_pqos, request.qos_weights)
            nhat_table = normalized_qos(cohort_pqos)
            ballots = build_ballots(successes, request.qos_weights)
            for method in cfg.voting_methods:
                winner, ops, paradox = _run_method(method, ballots, successes, request, seeds)
                pqos = outcomes[winner].pqos
                row = {
                    "seed": cfg.seed,
                    "request_id": request.request_id,
                    "strategy": strategy,
                    "k_percent": k,
                    "method": method,
                    "winner": winner,
                    "cohort_size": len(cohort_outcomes),
                    "cohort_successes": len(successes),
                    "delivery_time": pqos.delivery_time,
                    "energy": pqos.energy,
                    "cost": pqos.cost,
                    "execution_time": pqos.execution_time,
                    "satisfaction": sat_table[winner].overall,
                    "proxy_time": proxy,
                    "recommend_ops": ops,
                    "paradox": int(paradox),
                    "wall_s": wall_s,
                }
                for m in QOS_METRICS:
                    row[f"nhat_{m}"] = nhat_table[winner][m]
                    row[f"w_{m}"] = request.qos_weights[m]
                rows.append(row)
    return rows, "served"


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Run the full pipeline for every request; optionally write the CSV contract."""
    network = build_network(cfg)
    grid = build_region_grid(network, cfg.grid_resolution)
    heatmaps = build_all_heatmaps(network, grid)
    providers, requests = generate_scenario(
        cfg.seed, network, cfg.n_providers, cfg.n_requests, cfg.limits, cfg.ranges
    )
    seeds = Seeds.from_master(cfg.seed)

    rows: list[dict] = []
    outcomes = {"served": 0, "rejected": 0, "unserved": 0}
    for request in requests:
        request_rows, status = _process_request(
            request, providers, network, grid, heatmaps, seeds, cfg
        )
        outcomes[status] += 1
        rows.extend(request_rows)
    rows.sort(key=lambda r: (r["request_id"], r["strategy"], r["k_percent"], r["method"]))

    aggregated = aggregate(rows)
    manifest = {
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "config": config_to_jsonable(cfg),
        "network_nodes": network.n_nodes,
        "requests": dict(outcomes),
        "rows": len(rows),
    }
    result = ExperimentResult(rows, aggregated.summary, aggregated.trends, manifest)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


@dataclass
class AggregateResult:
    summary: list[dict]
    trends: dict[str, float | None]


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman rank correlation; None when undefined (constant input)."""
    if len(xs) != len(ys) or len(xs) < 2:
        return None
    import warnings

    from scipy import stats

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(xs, ys).correlation
    return None if math.isnan(rho) else float(rho)


def aggregate(rows: Sequence[Mapping]) -> AggregateResult:
    """Mean/stddev per (strategy, method, k) plus satisfaction/runtime trends vs k."""
    if not rows:
        return AggregateResult([], {})
    groups: dict[tuple, list[Mapping]] = {}
    for row in rows:
        groups.setdefault((row["strategy"], row["method"], row["k_percent"]), []).append(row)

    summary = []
    for (strategy, method, k), members in sorted(groups.items()):
        sats = [r["satisfaction"] for r in members]
        proxies = [r["proxy_time"] for r in members]
        per_request = {r["request_id"]: r for r in members}
        total = sum(r["cohort_size"] for r in per_request.values())
        failed = sum(r["cohort_size"] - r["cohort_successes"] for r in per_request.values())
        summary.append(
            {
                "seed": members[0].get("seed", 0),
                "strategy": strategy,
                "method": method,
                "k_percent": k,
                "requests_served": len(per_request),
                "mean_satisfaction": statistics.fmean(sats),
                "std_satisfaction": statistics.pstdev(sats),
                "mean_proxy_time": statistics.fmean(proxies),
                "mean_recommend_ops": statistics.fmean([r["recommend_ops"] for r in members]),
                "failure_rate": failed / total if total else 0.0,
            }
        )

    trends: dict[str, float | None] = {}
    by_pair: dict[tuple, dict[float, dict]] = {}
    for entry in summary:
        by_pair.setdefault((entry["strategy"], entry["method"]), {})[entry["k_percent"]] = entry
    for (strategy, method), per_k in sorted(by_pair.items()):
        if len(per_k) < 2:
            continue
        ks = sorted(per_k)
        trends[f"{strategy}/{method}/satisfaction_vs_k"] = spearman(
            ks, [per_k[k]["mean_satisfaction"] for k in ks]
        )
        trends[f"{strategy}/{method}/proxy_time_vs_k"] = spearman(
            ks, [per_k[k]["mean_proxy_time"] for k in ks]
        )
    return AggregateResult(summary, trends)


def config_to_jsonable(cfg: ExperimentConfig) -> dict:
    raw = dataclasses.asdict(cfg)
    raw["energy"]["formation_factors"] = {
        formation.value: list(row)
        for formation, row in cfg.energy.formation_factors.items()
    }
    raw["energy"]["position_factors"] = list(cfg.energy.position_factors)
    return raw


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _render_csv(fieldnames: Sequence[str], rows: Sequence[Mapping]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in fieldnames})
    return buffer.getvalue()


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "per_request.csv").write_text(_render_csv(PER_REQUEST_FIELDS, result.rows))
    (out / "summary.csv").write_text(_render_csv(SUMMARY_FIELDS, result.summary))
    (out / "manifest.json").write_text(
        json.dumps(result.manifest, indent=2, sort_keys=True) + "\n"
    )
