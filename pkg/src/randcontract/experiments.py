"""Experiment runners behind the command-line tool.

Each ``run_*`` returns a :class:`Report`; nothing touches the disk until
:meth:`Report.write`, so a failed run never leaves a partial file.
"""

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from . import __version__
from .chains import (
    ContractionConfig,
    SingularSpectrum,
    empirical_moments,
    iter_product_chain,
    kaczmarz_chain,
    singular_spectrum,
    spectrum_entropy,
)
from .density import chisq_moment, continuum_tail, density_profile
from .estimators import resolve_config, sample_spectra
from .exceptions import DegenerateStateError, InvalidParameterError
from .haar import GroupKind, SeedSpec
from .limits import (
    ScalingPoint,
    erlang_G,
    kaczmarz_moment,
    lambda_min,
    moment_asymptotic,
    moment_limit,
    renyi_offset,
    vn_entropy_offset,
)
from .recursion import P_MAX, solve_recursion

log = logging.getLogger(__name__)

COMMANDS = ("moments", "recursion", "analytic", "density", "entropy", "kaczmarz")
FORMATS = ("csv", "json")
ATOM_CUTOFF = 1e-6
DEFAULT_ENTROPY_TAUS = tuple(np.round(np.arange(0.2, 5.0001, 0.2), 10))


@dataclass
class ExperimentSpec:
    command: str
    n: int = 300
    delta_n: int = 1
    tau: tuple = None
    chain_length: int = None
    group: str = "unitary"
    realizations: int = 20
    seed: int = 0
    p_max: int = 20
    alpha: float = None
    bins: int = 60
    lambda_max: float = None
    output_format: str = "csv"
    out: str = None
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidParameterError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.output_format not in FORMATS:
            raise InvalidParameterError(f"format must be one of {FORMATS}, got {self.output_format!r}")
        if self.tau is not None:
            taus = (self.tau,) if np.isscalar(self.tau) else tuple(self.tau)
            self.tau = tuple(float(t) for t in taus)
            if len(self.tau) > 1 and self.command != "entropy":
                raise InvalidParameterError("only the entropy command accepts several tau values")
        if self.tau is not None and self.chain_length is not None:
            raise InvalidParameterError("tau and chain_length are mutually exclusive")
        if self.bins < 10:
            raise InvalidParameterError(f"bins must be at least 10, got {self.bins}")
        if not 1 <= self.p_max <= 1000:
            raise InvalidParameterError(f"p_max must be in 1..1000, got {self.p_max}")
        if self.workers < 1:
            raise InvalidParameterError(f"workers must be positive, got {self.workers}")
        self.group = GroupKind.coerce(self.group).value

    @property
    def single_tau(self):
        if self.tau is None:
            return None
        return self.tau[0]

    def config(self, **overrides):
        tau = self.single_tau
        if self.tau is None and self.chain_length is None:
            tau = 1.0
        kwargs = dict(
            group=GroupKind.coerce(self.group),
            seed=SeedSpec(int(self.seed)),
            realizations=self.realizations,
        )
        kwargs.update(overrides)
        return resolve_config(self.n, self.delta_n, tau=tau, chain_length=self.chain_length, **kwargs)

    def to_dict(self):
        out = asdict(self)
        out["tau"] = list(self.tau) if self.tau is not None else None
        out.pop("out")
        out.pop("workers")
        out["version"] = __version__
        return out


@dataclass
class Report:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_json(self):
        payload = {"meta": self.meta, "columns": self.columns, "rows": [[_json_value(v) for v in r] for r in self.rows]}
        return json.dumps(_json_clean(payload), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        buf.write("# " + json.dumps(_json_clean(self.meta), sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_value(v) for v in row])
        return buf.getvalue()

    def render(self, fmt):
        return self.to_json() if fmt == "json" else self.to_csv()

    def write(self, path, fmt):
        text = self.render(fmt)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_clean(v) for v in obj.tolist()]
    return _json_value(obj)


class _Timer:
    def __init__(self, what):
        self.what = what

    def __enter__(self):
        self.start = time.perf_counter()
        log.info("%s: started", self.what)
        return self

    def __exit__(self, *exc):
        log.info("%s: %.2f s", self.what, time.perf_counter() - self.start)
        return False


def _meta(spec, config=None, **extra):
    meta = {"request": spec.to_dict()}
    if config is not None:
        meta["resolved"] = config.to_dict()
    meta.update(extra)
    return meta


def run_moments(spec):
    """Ensemble moments against the limit formula and the recursion."""
    config = spec.config()
    p = np.arange(1, spec.p_max + 1)
    with _Timer(f"moments N={config.n} dN={config.delta_n} L={config.chain_length} {config.group.value}"):
        table = empirical_moments(sample_spectra(config, spec.workers), p)
    analytic = moment_limit(p.astype(float), config.tau) if config.tau > 0 else np.ones(p.size)
    rec_p = min(spec.p_max, P_MAX)
    rec = solve_recursion(config.n, config.delta_n, config.projections, rec_p).values[-1]
    recursion = np.concatenate([rec, np.full(spec.p_max - rec_p, np.nan)])
    rows = [
        [int(k), float(m), float(s), float(a), float(r)]
        for k, m, s, a, r in zip(p, table.mean, table.se, np.atleast_1d(analytic), recursion)
    ]
    return Report(["p", "mean", "se", "analytic", "recursion"], rows, _meta(spec, config))


def run_recursion(spec):
    """Full recursion trajectory S_p(n), n = 0..L."""
    if spec.tau is not None:
        steps = int(round(spec.single_tau * spec.n / spec.delta_n))
    else:
        steps = spec.chain_length if spec.chain_length is not None else spec.n // spec.delta_n
    p_max = min(spec.p_max, P_MAX)
    with _Timer(f"recursion N={spec.n} dN={spec.delta_n} steps={steps}"):
        table = solve_recursion(spec.n, spec.delta_n, steps, p_max)
    columns = ["step", "tau"] + [f"S_{k}" for k in range(1, p_max + 1)]
    rows = [
        [i, i * spec.delta_n / spec.n] + [float(v) for v in table.values[i]] for i in range(steps + 1)
    ]
    meta = _meta(spec, steps=steps, p_max=p_max, underflow_entries=int(table.underflow.sum()))
    return Report(columns, rows, meta)


def run_analytic(spec):
    """Limit moments, Erlang function and large-p asymptotics at one tau."""
    point = ScalingPoint(spec.single_tau if spec.tau is not None else 1.0)
    p = np.arange(1, spec.p_max + 1)
    rows = []
    for k in p:
        k = int(k)
        g = erlang_G(k, point) if k <= 150 else float("nan")
        rows.append([k, float(g), float(moment_limit(float(k), point)), float(moment_asymptotic(k, point).value)])
    extra = {
        "tau": point.tau,
        "regime": point.regime,
        "lambda_min": point.lambda_min,
        "vn_entropy_offset": vn_entropy_offset(point),
    }
    if spec.alpha is not None:
        extra["alpha"] = float(spec.alpha)
        extra["renyi_offset"] = renyi_offset(spec.alpha, point)
    return Report(["p", "erlang_G", "moment_limit", "asymptotic"], rows, _meta(spec, **extra))


def lambda_histogram(spectra, bins, lambda_max):
    """Normalized histogram of lambda with the atom and the far tail kept apart.

    Every singular value is counted in the total. Values with
    lambda < ATOM_CUTOFF form the atom; those beyond ``lambda_max``
    (including the exactly vanishing ones) go to the overflow mass.
    """
    lam = np.concatenate([s.lambdas for s in spectra])
    total = lam.size
    atom = lam < ATOM_CUTOFF
    over = lam > lambda_max
    edges = np.linspace(0.0, lambda_max, bins + 1)
    counts, _ = np.histogram(lam[~atom & ~over], bins=edges)
    width = np.diff(edges)
    return {
        "edges": edges,
        "counts": counts,
        "density": counts / (total * width),
        "se": np.sqrt(np.maximum(counts, 1)) / (total * width),
        "atom_count": int(atom.sum()),
        "overflow_count": int(over.sum()),
        "total": int(total),
        "underflow_count": int(sum(int(s.underflow.sum()) for s in spectra)),
    }


def bin_averaged_density(tau, edges):
    """Exact bin averages of the limit continuum density."""
    tail = continuum_tail(tau, np.maximum(edges, 1e-300))
    return (tail[:-1] - tail[1:]) / np.diff(edges)


def run_density(spec):
    """Histogram of lambda = -ln sigma^2 next to the reconstructed limit density."""
    config = spec.config()
    if config.tau <= 0:
        raise InvalidParameterError("density needs at least one projection (tau > 0)")
    lambda_max = spec.lambda_max
    if lambda_max is None:
        lambda_max = 10.0 * max(1.0, config.tau)
    with _Timer(f"density N={config.n} dN={config.delta_n} L={config.chain_length} {config.group.value}"):
        spectra = sample_spectra(config, spec.workers)
    h = lambda_histogram(spectra, spec.bins, lambda_max)
    profile = density_profile(config.tau, lambda_max, max(400, 4 * spec.bins))
    edges = h["edges"]
    mids = 0.5 * (edges[:-1] + edges[1:])
    pointwise = np.interp(mids, profile.lambda_grid, profile.density, left=0.0)
    averaged = bin_averaged_density(config.tau, edges)
    total = h["total"]
    atom_freq = h["atom_count"] / total
    rows = [["atom", 0.0, 0.0, 0.0, atom_freq, np.sqrt(max(h["atom_count"], 1)) / total, profile.atom_weight, profile.atom_weight]]
    for i in range(spec.bins):
        rows.append(
            ["bin", float(edges[i]), float(edges[i + 1]), float(mids[i]), float(h["density"][i]),
             float(h["se"][i]), float(averaged[i]), float(pointwise[i])]
        )
    over_freq = h["overflow_count"] / total
    rows.append(["overflow", float(lambda_max), float("inf"), float("nan"), over_freq,
                 np.sqrt(max(h["overflow_count"], 1)) / total,
                 float(continuum_tail(config.tau, lambda_max)), float("nan")])
    extra = {
        "lambda_min": lambda_min(config.tau),
        "atom_cutoff": ATOM_CUTOFF,
        "total_values": total,
        "underflow_values": h["underflow_count"],
        "profile": profile.metadata,
    }
    columns = ["kind", "lambda_lo", "lambda_hi", "lambda_mid", "frequency", "se", "analytic_mean", "profile"]
    return Report(columns, rows, _meta(spec, config, **extra))


def entropy_trajectory(config, steps):
    """Von Neumann entropy of one product chain after each requested step count."""
    wanted = sorted(set(int(s) for s in steps))
    out = {}
    with threadpool_limits(limits=1):
        for k, c in enumerate(iter_product_chain(replace_length(config, wanted[-1]))):
            if k in wanted:
                try:
                    out[k] = spectrum_entropy(singular_spectrum(c))
                except DegenerateStateError:
                    out[k] = float("nan")
    return np.array([out[k] for k in wanted])


def replace_length(config, length):
    return ContractionConfig(
        config.n, config.delta_n, length, config.group, config.seed, config.realizations, config.construction
    )


def _steps_for(spec):
    if spec.chain_length is not None:
        return list(range(spec.chain_length + 1))
    taus = spec.tau if spec.tau is not None else DEFAULT_ENTROPY_TAUS
    return sorted({ContractionConfig.from_tau(spec.n, spec.delta_n, t).chain_length for t in taus})


def run_entropy(spec):
    """Entropy along single chains, averaged over realizations when there are several."""
    steps = _steps_for(spec)
    base = ContractionConfig(
        spec.n, spec.delta_n, max(steps), GroupKind.coerce(spec.group), SeedSpec(int(spec.seed)), spec.realizations
    )
    with _Timer(f"entropy N={base.n} dN={base.delta_n} steps<={max(steps)} x{base.realizations}"):
        jobs = (delayed(entropy_trajectory)(base.realization(i), steps) for i in range(base.realizations))
        per = np.array(Parallel(n_jobs=spec.workers)(jobs))
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / np.sqrt(per.shape[0]) if per.shape[0] > 1 else np.full(mean.shape, np.nan)
    rows = []
    for k, m, s in zip(steps, mean, se):
        cfg = replace_length(base, k)
        tau = cfg.tau
        analytic = np.log(spec.n) + vn_entropy_offset(tau) if tau > 0 else np.log(spec.n)
        rows.append([int(k), float(tau), float(m), float(s), float(analytic)])
    degenerate = int(np.isnan(per).sum())
    meta = _meta(spec, base, degenerate_entries=degenerate)
    return Report(["chain_length", "tau", "entropy", "se", "analytic"], rows, meta)


def _kaczmarz_one(n, seed, index):
    with threadpool_limits(limits=1):
        return singular_spectrum(kaczmarz_chain(n, SeedSpec(seed, index))).sigma_sq


def run_kaczmarz(spec):
    """Moments of the Kaczmarz projector product against the tau = 1 limit."""
    p = np.arange(1, spec.p_max + 1)
    with _Timer(f"kaczmarz N={spec.n} x{spec.realizations}"):
        jobs = (delayed(_kaczmarz_one)(spec.n, int(spec.seed), i) for i in range(spec.realizations))
        spectra = [SingularSpectrum.from_sigma_sq(s) for s in Parallel(n_jobs=spec.workers)(jobs)]
    table = empirical_moments(spectra, p)
    rows = [
        [int(k), float(m), float(s), float(kaczmarz_moment(float(k))), float(chisq_moment(float(k)))]
        for k, m, s in zip(p, table.mean, table.se)
    ]
    return Report(["p", "mean", "se", "analytic", "chisq"], rows, _meta(spec))


RUNNERS = {
    "moments": run_moments,
    "recursion": run_recursion,
    "analytic": run_analytic,
    "density": run_density,
    "entropy": run_entropy,
    "kaczmarz": run_kaczmarz,
}


def run(spec):
    return RUNNERS[spec.command](spec)
