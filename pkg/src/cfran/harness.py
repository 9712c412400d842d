"""Monte Carlo experiments: SE sweeps, error-probability curves, bound
validation and association comparisons.

Every trial redraws the deployment (positions, shadowing, RRU grouping) and
then ``fading_realizations`` small-scale fading draws. Trial ``t`` always uses
the same random streams, so grid points share common random numbers and a run
is reproducible regardless of the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .association import (Partition, dcc_associate, graph_color_associate, kmeans_pp)
from .bounds import bounds_from_surrogates, exclusion_sets, surrogate_lower, surrogate_upper
from .channel import (antenna_rows, assign_pilots, correlation_set, correlation_sqrt,
                      draw_channels, estimate_channels, large_scale_fading)
from .combining import (instantaneous_sinr, mmse_combiner, sinr_terms, stack_combiners,
                        uatf_sinr, zf_combiner)
from .errors import (ConfigError, DegenerateGeometryError, SingularChannelError,
                     UnsupportedConfigurationError)
from .fbl import error_prob_from_moments, normal_error_prob, q_inv, sum_moments
from .scenario import ScenarioConfig, config_from_dict, derive_stream, generate_geometry

log = logging.getLogger(__name__)

KINDS = ("se_sweep", "error_sweep", "bound_validation", "association_comparison")
METRICS = ("se_cdf", "se_mean", "eps_curve", "bound_quadruple", "dispersion_mean")
# axes that only enter the finite-blocklength formulas, not the SINRs
FBL_AXES = ("block_length", "error_prob", "target_se_per_ue", "unscaled_dispersion")
DERIVED_AXES = ("rrus_per_edu", "total_antennas")
MIN_AGGREGATE_TRIALS = 10
QUANTILES = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
COMPARED = ("graph_coloring", "kmeans_pp")


# ---------------------------------------------------------------------------
# Experiment description


@dataclass
class ExperimentSpec:
    """A base scenario, a Cartesian grid of sweep axes and the metrics to report.

    Axes are dotted config fields or the derived ``rrus_per_edu`` (sets
    ``num_rrus = value * num_edus``) and ``total_antennas`` (sets
    ``num_rrus = value / antennas_per_rru``).
    """

    base: ScenarioConfig
    sweep_axes: list = field(default_factory=list)
    metrics: tuple = ("se_mean",)
    kind: str = "se_sweep"
    name: str = "experiment"
    output_path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}", field="kind")
        bad = [m for m in self.metrics if m not in METRICS]
        if bad:
            raise ConfigError(f"unknown metric(s) {bad}", field="metrics")
        axes = []
        for axis, values in self.sweep_axes:
            values = list(values)
            if not values:
                raise ConfigError("sweep grid must be nonempty", field=axis)
            axes.append((str(axis), values))
        self.sweep_axes = axes
        for point in self.points():
            self.config_at(point)  # validates every grid point up front

    @property
    def axis_names(self) -> list[str]:
        return [a for a, _ in self.sweep_axes]

    def points(self) -> list[dict]:
        names = self.axis_names
        grids = [v for _, v in self.sweep_axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*grids)]

    def config_at(self, point: dict) -> ScenarioConfig:
        data = self.base.to_dict()
        derived = {}
        for axis, value in point.items():
            if axis in DERIVED_AXES:
                derived[axis] = value
                continue
            node = data
            parts = axis.split(".")
            for part in parts[:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigError("not a config field", field=axis)
                node = node[part]
            if parts[-1] not in node:
                raise ConfigError("not a config field", field=axis)
            node[parts[-1]] = value
        if "rrus_per_edu" in derived:
            data["num_rrus"] = int(derived["rrus_per_edu"]) * int(data["num_edus"])
        if "total_antennas" in derived:
            total, N = int(derived["total_antennas"]), int(data["antennas_per_rru"])
            if total % N:
                raise ConfigError("total_antennas must be a multiple of antennas_per_rru",
                                  field="total_antennas")
            data["num_rrus"] = total // N
        return config_from_dict(data)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "metrics": list(self.metrics),
            "sweep": [{"axis": a, "values": list(v)} for a, v in self.sweep_axes],
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {"kind", "name", "metrics", "sweep", "base", "output_path"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown experiment key(s) {unknown}")
        sweep = []
        for entry in data.get("sweep") or []:
            if not isinstance(entry, dict) or set(entry) != {"axis", "values"}:
                raise ConfigError("sweep entries need exactly 'axis' and 'values'", field="sweep")
            sweep.append((entry["axis"], entry["values"]))
        return cls(
            base=config_from_dict(data.get("base") or {}),
            sweep_axes=sweep,
            metrics=tuple(data.get("metrics") or ("se_mean",)),
            kind=data.get("kind", "se_sweep"),
            name=data.get("name", "experiment"),
            output_path=data.get("output_path"),
        )

    def digest(self) -> str:
        import hashlib
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Result table


class ResultTable:
    """Long-format results: one row per (point, trial or aggregate, metric)."""

    def __init__(self, axes, meta=None):
        self.axes = list(axes)
        self.meta = dict(meta or {})
        self.rows: list[tuple] = []

    @property
    def header(self) -> list[str]:
        return ["point", *self.axes, "trial", "metric", "value", "stderr"]

    def add(self, point, coords, trial, metric, value, stderr=float("nan")):
        self.rows.append((int(point), *[coords[a] for a in self.axes], trial, metric,
                          float(value), float(stderr)))

    def select(self, metric, trial="aggregate", **coords) -> list[tuple]:
        idx = {a: i + 1 for i, a in enumerate(self.axes)}
        n = len(self.axes)
        out = []
        for row in self.rows:
            if row[n + 2] != metric or (trial is not None and row[n + 1] != trial):
                continue
            if all(row[idx[a]] == v for a, v in coords.items()):
                out.append(row)
        return out

    def value(self, metric, point=None, **coords):
        """(value, stderr) of one aggregate row."""
        rows = self.select(metric, "aggregate", **coords)
        if point is not None:
            rows = [r for r in rows if r[0] == point]
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} aggregate rows match {metric} {coords}")
        return rows[0][-2], rows[0][-1]

    def trial_values(self, metric, point) -> np.ndarray:
        n = len(self.axes)
        return np.array([r[-2] for r in self.rows
                         if r[0] == point and r[n + 2] == metric and r[n + 1] != "aggregate"])

    @staticmethod
    def _fmt(x):
        if isinstance(x, float):
            return repr(x)
        return str(x)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}: {self.meta[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([self._fmt(x) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        def clean(x):
            return None if isinstance(x, float) and not math.isfinite(x) else x
        doc = {"meta": self.meta, "columns": self.header,
               "rows": [[clean(x) for x in row] for row in self.rows]}
        text = json.dumps(doc, indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        meta, lines = {}, []
        for line in text.splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            else:
                lines.append(line)
        reader = csv.reader(lines)
        header = next(reader)
        table = cls(header[1:-4], meta)
        for rec in reader:
            trial = rec[-4]
            trial = trial if trial == "aggregate" else int(trial)
            coords = [_parse_scalar(x) for x in rec[1:-4]]
            table.rows.append((int(rec[0]), *coords, trial, rec[-3], float(rec[-2]), float(rec[-1])))
        return table


def _parse_scalar(text):
    value = yaml.safe_load(text)
    return value if isinstance(value, (int, float, bool)) else text


# ---------------------------------------------------------------------------
# One trial


@dataclass
class TrialOutput:
    trial: int
    gammas: dict = field(default_factory=dict)  # grouping -> (F, K) SINRs
    gamma_stderr: dict = field(default_factory=dict)  # grouping -> (K,) for the hardening SINR
    surrogates: dict = field(default_factory=dict)  # grouping -> (s_ub, s_lb)
    skipped: str | None = None


def make_partition(config: ScenarioConfig, geometry, rng, grouping=None) -> Partition:
    grouping = config.rru_grouping if grouping is None else grouping
    M = config.num_edus
    if grouping == "graph_coloring":
        return graph_color_associate(geometry, M, config.coloring, rng)
    if grouping == "kmeans_pp":
        return kmeans_pp(geometry, M, rng, config.kmeans_restarts)
    return Partition.from_groups([list(g) for g in config.manual_partition], geometry.num_rrus)


def combine(config: ScenarioConfig, H_hat, partition: Partition, association, p) -> np.ndarray:
    """Stacked per-EDU combiners for one realization."""
    N = config.antennas_per_rru
    blocks, rows_all = [], []
    for m, group in enumerate(partition.groups):
        rows = antenna_rows(group, N)
        H_m = H_hat[rows]
        if config.combiner == "zf":
            if association is not None and not association.is_full:
                raise UnsupportedConfigurationError("ZF combining is defined for full association only")
            blocks.append(zf_combiner(H_m, edu=m))
        else:
            mask = None if association is None else association.edu_mask(group, N)
            blocks.append(mmse_combiner(H_m, p, 1.0, mask))
        rows_all.append(rows)
    return stack_combiners(blocks, rows_all, H_hat.shape[0])


def simulate_trial(config: ScenarioConfig, trial: int, groupings=None,
                   with_bounds: bool = False) -> TrialOutput:
    """SINR samples of one deployment for each RRU grouping strategy.

    Degenerate deployments (empty exclusion sets, diverging inverted-Gamma
    means, singular ZF channels) are reported through ``skipped``.
    """
    groupings = (config.rru_grouping,) if groupings is None else tuple(groupings)
    seed, N, K = config.master_seed, config.antennas_per_rru, config.num_ues
    p = config.snr_scale
    out = TrialOutput(trial)
    geometry = generate_geometry(config, derive_stream(seed, trial, "geometry"))
    beta = large_scale_fading(config, geometry, derive_stream(seed, trial, "shadowing")).beta
    R = correlation_set(config.correlation, geometry, N)
    R_sqrt = correlation_sqrt(R)
    pilots = assign_pilots(config.num_pilots, beta)
    association = dcc_associate(beta, pilots, config.num_pilots) \
        if config.association_mode == "dcc" else None
    parts = {g: make_partition(config, geometry, derive_stream(seed, trial, f"partition/{g}"), g)
             for g in groupings}
    try:
        if with_bounds:
            if N != 1:
                raise UnsupportedConfigurationError("bound validation needs antennas_per_rru = 1")
            for g, part in parts.items():
                sets = exclusion_sets(beta, part)
                out.surrogates[g] = (surrogate_upper(beta, part, p, sets),
                                     surrogate_lower(beta, part, p, sets))
        uatf = config.sinr_mode == "uatf"
        draws = config.uatf_samples if uatf else config.fading_realizations
        rng = derive_stream(seed, trial, "fading")
        acc = {g: [] for g in groupings}
        for _ in range(draws):
            H = draw_channels(beta, R_sqrt, N, rng)
            if config.csi_mode == "perfect":
                H_hat = H
            else:
                H_hat = estimate_channels(H, beta, R, pilots, p, N, rng, config.num_pilots)
            for g, part in parts.items():
                V = combine(config, H_hat, part, association, p)
                acc[g].append(sinr_terms(V, H, p) if uatf else instantaneous_sinr(V, H, p))
        for g in groupings:
            if uatf:
                gains, interference, norms = (np.array(x) for x in zip(*acc[g]))
                res = uatf_sinr(gains, interference, norms, np.full(K, p))
                out.gammas[g] = res.gamma[None, :]
                out.gamma_stderr[g] = res.stderr
            else:
                out.gammas[g] = np.array(acc[g])
    except (DegenerateGeometryError, SingularChannelError) as exc:
        log.info("trial %d skipped: %s", trial, exc)
        return TrialOutput(trial, skipped=f"{type(exc).__name__}: {exc}")
    return out


def _task(args):
    config_dict, trial, groupings, with_bounds = args
    return simulate_trial(config_from_dict(config_dict), trial, groupings, with_bounds)


def run_trials(tasks, workers: int = 1) -> list[TrialOutput]:
    """Evaluate ``(config, trial, groupings, with_bounds)`` tasks, results in task order."""
    payload = [(c.to_dict(), t, g, b) for c, t, g, b in tasks]
    if workers <= 1 or len(payload) <= 1:
        return [_task(a) for a in payload]
    chunk = max(1, len(payload) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, payload, chunksize=chunk))


# ---------------------------------------------------------------------------
# Statistics helpers


def mean_se(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    return float(x.mean()), se


def quantile_se(x, q):
    """Quantile and a distribution-free standard error from order statistics."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    est = float(np.quantile(x, q))
    half = 1.959964 * math.sqrt(n * q * (1 - q))
    lo = int(np.clip(math.floor(n * q - half), 0, n - 1))
    hi = int(np.clip(math.ceil(n * q + half), 0, n - 1))
    return est, float((x[hi] - x[lo]) / (2 * 1.959964))


def fbl_moments(gammas, unscaled_dispersion=False):
    """Per-realization sum capacity and joint dispersion, shape (F,) each."""
    return sum_moments(gammas, unscaled_dispersion)


def fbl_rates(gammas, n, eps, unscaled_dispersion=False) -> np.ndarray:
    cap, disp = sum_moments(gammas, unscaled_dispersion)
    return np.maximum(cap - np.sqrt(disp / n) * q_inv(eps), 0.0)


def dispersion_term(gammas, n, eps, unscaled_dispersion=False) -> np.ndarray:
    """``sqrt(V / n) Q^-1(eps)`` per realization."""
    _, disp = sum_moments(gammas, unscaled_dispersion)
    return np.sqrt(disp / n) * q_inv(eps)


# ---------------------------------------------------------------------------
# Drivers


def _physical_key(config: ScenarioConfig) -> str:
    return config.replace(block_length=1, error_prob=0.25, target_se_per_ue=0.0,
                          unscaled_dispersion=False).digest()


def _collect(spec: ExperimentSpec, groupings, with_bounds, workers):
    """Run every distinct physical configuration once; map points to their trials."""
    configs = [spec.config_at(pt) for pt in spec.points()]
    keys, unique = [], {}
    for cfg in configs:
        key = _physical_key(cfg)
        keys.append(key)
        unique.setdefault(key, cfg)
    tasks, owners = [], []
    for key, cfg in unique.items():
        for t in range(cfg.trials):
            tasks.append((cfg, t, groupings, with_bounds))
            owners.append(key)
    results = run_trials(tasks, workers)
    by_key = {k: [] for k in unique}
    for key, res in zip(owners, results):
        by_key[key].append(res)
    return configs, [by_key[k] for k in keys]


def _meta(spec: ExperimentSpec) -> dict:
    return {"name": spec.name, "kind": spec.kind, "spec_hash": spec.digest(),
            "config_hash": spec.base.digest(), "seed": spec.base.master_seed,
            "version": __version__, "axes": ",".join(spec.axis_names) or "-"}


def _add_aggregate(table, i, coords, metric, samples):
    samples = np.asarray(samples, dtype=float)
    if np.isfinite(samples).sum() < MIN_AGGREGATE_TRIALS:
        return
    table.add(i, coords, "aggregate", metric, *mean_se(samples))


def _add_counts(table, i, coords, trials):
    skipped = sum(r.skipped is not None for r in trials)
    table.add(i, coords, "aggregate", "trials_used", len(trials) - skipped, 0.0)
    table.add(i, coords, "aggregate", "trials_skipped", skipped, 0.0)


def _add_quantiles(table, i, coords, metric, samples):
    samples = np.asarray(samples, dtype=float)
    if samples.size < MIN_AGGREGATE_TRIALS:
        return
    for q in QUANTILES:
        table.add(i, coords, "aggregate", f"{metric}_q{q:g}", *quantile_se(samples, q))


def run_se_sweep(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Mean finite-blocklength sum SE, Shannon sum SE and dispersion penalty per grid point."""
    configs, trial_sets = _collect(spec, None, False, workers)
    table = ResultTable(spec.axis_names, _meta(spec))
    for i, (pt, cfg, trials) in enumerate(zip(spec.points(), configs, trial_sets)):
        g = cfg.rru_grouping
        se, cap, pen = [], [], []
        for r in trials:
            if r.skipped:
                continue
            gam = r.gammas[g]
            se.append(fbl_rates(gam, cfg.block_length, cfg.error_prob, cfg.unscaled_dispersion).mean())
            cap.append(sum_moments(gam)[0].mean())
            pen.append(dispersion_term(gam, cfg.block_length, cfg.error_prob,
                                       cfg.unscaled_dispersion).mean())
            for metric, val in (("se", se[-1]), ("capacity", cap[-1]), ("dispersion_term", pen[-1])):
                table.add(i, pt, r.trial, metric, val)
        for metric, vals in (("se", se), ("capacity", cap), ("dispersion_term", pen)):
            _add_aggregate(table, i, pt, metric, vals)
        if "se_cdf" in spec.metrics:
            _add_quantiles(table, i, pt, "se", se)
        _add_counts(table, i, pt, trials)
    return table


def _jackknife(cap, disp, n, target):
    """Leave-one-trial-out standard error of the pooled error probability."""
    T = cap.size
    if T < 2:
        return float("nan")
    cs, ds = cap.sum(), disp.sum()
    loo = np.asarray(error_prob_from_moments((cs - cap) / (T - 1), (ds - disp) / (T - 1), n, target))
    if np.any(~np.isfinite(loo)):
        return float("nan")
    return float(np.sqrt((T - 1) / T * ((loo - loo.mean()) ** 2).sum()))


def run_error_sweep(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Error probability that meets ``target_se_per_ue * K`` per grid point.

    ``eps``: capacity and dispersion are averaged over all trials and
    realizations before the normal approximation is inverted; an unachievable
    target gives NaN and an ``unachievable`` flag of 1. ``eps_deployment``: the
    normal approximation per deployment, averaged over deployments.
    """
    configs, trial_sets = _collect(spec, None, False, workers)
    table = ResultTable(spec.axis_names, _meta(spec))
    for i, (pt, cfg, trials) in enumerate(zip(spec.points(), configs, trial_sets)):
        g = cfg.rru_grouping
        n, target = cfg.block_length, cfg.target_rate
        cap, disp = [], []
        for r in trials:
            if r.skipped:
                continue
            c, v = sum_moments(r.gammas[g], cfg.unscaled_dispersion)
            cap.append(c.mean())
            disp.append(v.mean())
            table.add(i, pt, r.trial, "capacity", cap[-1])
            table.add(i, pt, r.trial, "dispersion", disp[-1])
            table.add(i, pt, r.trial, "eps_deployment", normal_error_prob(cap[-1], disp[-1], n, target))
        cap, disp = np.array(cap), np.array(disp)
        _add_aggregate(table, i, pt, "eps_deployment", normal_error_prob(cap, disp, n, target))
        if cap.size >= MIN_AGGREGATE_TRIALS:
            eps = float(error_prob_from_moments(cap.mean(), disp.mean(), n, target))
            table.add(i, pt, "aggregate", "eps", eps, _jackknife(cap, disp, n, target))
            table.add(i, pt, "aggregate", "unachievable", float(not np.isfinite(eps)), 0.0)
            table.add(i, pt, "aggregate", "target_rate", target, 0.0)
            _add_aggregate(table, i, pt, "capacity", cap)
            _add_aggregate(table, i, pt, "dispersion", disp)
        _add_counts(table, i, pt, trials)
    return table


BOUND_METRICS = ("x_ub", "x_lb", "y_ub", "y_lb", "r_ub", "r_lb")


def run_bound_validation(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Monte Carlo sum SE under ZF next to the closed-form bounds, per deployment."""
    for pt in spec.points():
        cfg = spec.config_at(pt)
        if cfg.antennas_per_rru != 1:
            raise UnsupportedConfigurationError("bound validation needs antennas_per_rru = 1")
        if cfg.csi_mode != "perfect" or cfg.combiner != "zf" or cfg.association_mode != "full":
            raise ConfigError("bound validation needs perfect CSI, ZF combining and full association")
    configs, trial_sets = _collect(spec, None, True, workers)
    table = ResultTable(spec.axis_names, _meta(spec))
    for i, (pt, cfg, trials) in enumerate(zip(spec.points(), configs, trial_sets)):
        g = cfg.rru_grouping
        n, eps, pd = cfg.block_length, cfg.error_prob, cfg.unscaled_dispersion
        cols = {m: [] for m in ("se", "capacity", "dispersion_term") + BOUND_METRICS}
        violations = 0
        for r in trials:
            if r.skipped:
                continue
            gam = r.gammas[g]
            b = bounds_from_surrogates(*r.surrogates[g], n, eps, pd)
            vals = {"se": fbl_rates(gam, n, eps, pd).mean(),
                    "capacity": sum_moments(gam)[0].mean(),
                    "dispersion_term": dispersion_term(gam, n, eps, pd).mean()}
            vals.update({m: getattr(b, m) for m in BOUND_METRICS})
            violations += b.r_lb > b.r_ub
            for m, v in vals.items():
                cols[m].append(v)
                table.add(i, pt, r.trial, m, v)
        for m, v in cols.items():
            _add_aggregate(table, i, pt, m, v)
        _add_quantiles(table, i, pt, "se", cols["se"])
        _add_quantiles(table, i, pt, "r_lb", cols["r_lb"])
        _add_quantiles(table, i, pt, "r_ub", cols["r_ub"])
        table.add(i, pt, "aggregate", "sandwich_violations", violations, 0.0)
        _add_counts(table, i, pt, trials)
    return table


def _ratio_se(a, b):
    T = a.size
    ma, mb = a.mean(), b.mean()
    cov = np.cov(a, b)
    var = (cov[0, 0] / mb ** 2 + ma ** 2 * cov[1, 1] / mb ** 4 - 2 * ma * cov[0, 1] / mb ** 3) / T
    return float(ma / mb), float(np.sqrt(max(var, 0.0)))


def run_association_comparison(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Paired SE of interleaved (graph coloring) versus clustered (K-means++) grouping.

    Both strategies see the same deployments and the same channel draws.
    """
    configs, trial_sets = _collect(spec, COMPARED, False, workers)
    table = ResultTable(spec.axis_names, _meta(spec))
    gc, km = COMPARED
    for i, (pt, cfg, trials) in enumerate(zip(spec.points(), configs, trial_sets)):
        n, eps, pd = cfg.block_length, cfg.error_prob, cfg.unscaled_dispersion
        se = {gc: [], km: []}
        for r in trials:
            if r.skipped:
                continue
            for g in COMPARED:
                se[g].append(fbl_rates(r.gammas[g], n, eps, pd).mean())
                table.add(i, pt, r.trial, f"se_{g}", se[g][-1])
            table.add(i, pt, r.trial, "se_diff", se[gc][-1] - se[km][-1])
        a, b = np.array(se[gc]), np.array(se[km])
        if a.size >= MIN_AGGREGATE_TRIALS:
            d = a - b
            for g, v in ((gc, a), (km, b)):
                table.add(i, pt, "aggregate", f"se_{g}", *mean_se(v))
                if "se_cdf" in spec.metrics:
                    _add_quantiles(table, i, pt, f"se_{g}", v)
            table.add(i, pt, "aggregate", "se_diff", *mean_se(d))
            unpaired = float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))
            table.add(i, pt, "aggregate", "se_diff_unpaired", float(d.mean()), unpaired)
            table.add(i, pt, "aggregate", "se_ratio", *_ratio_se(a, b))
            frac = float((d > 0).mean())
            table.add(i, pt, "aggregate", "frac_positive", frac,
                      math.sqrt(frac * (1 - frac) / d.size))
        _add_counts(table, i, pt, trials)
    return table


RUNNERS = {
    "se_sweep": run_se_sweep,
    "error_sweep": run_error_sweep,
    "bound_validation": run_bound_validation,
    "association_comparison": run_association_comparison,
}


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    return RUNNERS[spec.kind](spec, workers)


# ---------------------------------------------------------------------------
# Presets


def preset_names() -> list[str]:
    from importlib import resources
    files = resources.files("cfran") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentSpec:
    from importlib import resources
    path = resources.files("cfran") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return ExperimentSpec.from_dict(yaml.safe_load(path.read_text(encoding="utf-8")))
