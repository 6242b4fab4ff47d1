"""Seeded experiment runner with CSV output.

Every trial draws from its own generator keyed by ``(seed, trial index)``,
so results do not depend on how trials are scheduled across threads. Rows
are emitted in trial order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import isolation as iso
from .games import classical_game_value, quantum_game_value
from .linalg import nearby_state, projected_trace_gap, random_projector, random_state
from .product_tests import AptLayout, apt_acceptance, best_product_overlap, swap_test_operator
from .transforms import (
    AmplifiedGameSpec,
    SimulationGameSpec,
    amplified_completeness_bound,
    amplified_honest_proof,
    amplified_soundness_bound,
    measurement_branch_operator,
    measurement_reject_bound,
    one_sided_amplify,
    qcph_honest_proof,
    qcph_to_qphpure_transform,
    simulation_completeness_bound,
    simulation_soundness_bound,
)
from .verifier import AcceptOperator, QuantifiedGame, accept_probability

CSV_HEADER = ["experiment", "params", "metric", "value", "stderr", "seed"]


class ValidationError(ValueError):
    """Bad experiment name, parameter or config."""


class InvariantViolation(RuntimeError):
    """A bound that must hold was observed to fail."""

    def __init__(self, message: str, rows: list | None = None):
        super().__init__(message)
        self.rows = rows or []


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    params: dict
    metric: str
    value: float
    stderr: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.metric}")


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    trials: int | None = None
    seed: int = 0
    out: str | None = None
    workers: int = 1

    def resolved(self) -> "ExperimentConfig":
        """Validate against the experiment schema and fill defaults."""
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        exp = EXPERIMENTS[self.experiment]
        unknown = set(self.params) - set(exp.schema)
        if unknown:
            raise ValidationError(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        params = {}
        for name, (kind, default) in exp.schema.items():
            raw = self.params.get(name, default)
            if kind.endswith("?"):
                params[name] = None if raw is None else _coerce(name, raw, kind[:-1])
            else:
                params[name] = _coerce(name, raw, kind)
        trials = exp.default_trials if self.trials is None else self.trials
        if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
            raise ValidationError("trials must be an integer >= 1")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ValidationError("workers must be >= 1")
        exp.check(params)
        return ExperimentConfig(self.experiment, params, trials, self.seed, self.out, self.workers)


def _coerce(name: str, raw: Any, kind: str):
    try:
        if kind == "int":
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError
            return int(raw)
        if kind == "float":
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        if kind == "ints":
            vals = raw if isinstance(raw, (list, tuple)) else [raw]
            return [int(v) for v in vals]
        if kind == "str":
            return str(raw)
        if kind == "table":
            arr = np.asarray(raw, dtype=float)
            if arr.ndim != 2 or arr.shape != (2, 2):
                raise ValueError
            return arr.tolist()
    except (TypeError, ValueError):
        pass
    raise ValidationError(f"parameter {name!r} expects {kind}, got {raw!r}")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


def _map_trials(fn: Callable[[int, np.random.Generator], Any], cfg: ExperimentConfig) -> list:
    def run(t):
        return fn(t, trial_rng(cfg.seed, t))

    if cfg.workers > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(run, range(cfg.trials)))
    return [run(t) for t in range(cfg.trials)]


@dataclass(frozen=True)
class Experiment:
    run: Callable[[ExperimentConfig], list[ResultRow]]
    schema: dict
    default_trials: int = 1
    check: Callable[[dict], None] = lambda params: None


# ---------------------------------------------------------------------------
# experiments


def _apt_bound_scan(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    layout = AptLayout.qubits(p["n"], p["m"], p["extra_dim"])

    def trial(t, rng):
        psi = [random_state(2, rng).amplitudes for _ in range(layout.n)]
        phi = random_state(layout.bc_dim, rng).amplitudes
        acc = apt_acceptance(layout, psi, phi)
        res = best_product_overlap(phi, layout, grid_points=p["grid_points"])
        bound = 1.0 - (res.epsilon - res.gap) / (2 * layout.m * layout.n)
        return acc <= bound + 1e-9, bound - acc

    out = _map_trials(trial, cfg)
    rows = [ResultRow(cfg.experiment, p, "apt_bound_holds", float(ok), None, cfg.seed) for ok, _ in out]
    margin = min(mg for _, mg in out)
    rows.append(ResultRow(cfg.experiment, p, "min_margin", float(margin), None, cfg.seed))
    if not all(ok for ok, _ in out):
        raise InvariantViolation("APT acceptance exceeded its bound", rows)
    return rows


def _toy_amplification_base(kind: str) -> tuple[AcceptOperator, float]:
    sym = swap_test_operator(2).matrix
    if kind == "yes":
        return AcceptOperator(0.1 * np.eye(4) + 0.8 * sym, (2, 2)), 0.9
    return AcceptOperator(0.2 * np.eye(4) + 0.4 * sym, (2, 2)), 0.6


def _amplification_check(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    c, s, m = p["c"], p["s"], p["m"]
    rows: list[ResultRow] = []
    ok = True

    def emit(metric, value, err=None):
        rows.append(ResultRow(cfg.experiment, p, metric, float(value), err, cfg.seed))

    yes_op, _ = _toy_amplification_base("yes")
    no_op, _ = _toy_amplification_base("no")
    yes_spec = AmplifiedGameSpec(QuantifiedGame(yes_op, ("A", "E")), c, s, m)
    no_spec = AmplifiedGameSpec(QuantifiedGame(no_op, ("A", "E")), c, s, m)
    yes = quantum_game_value(one_sided_amplify(yes_spec), grid_points=p["grid_points"])
    no = quantum_game_value(one_sided_amplify(no_spec), grid_points=p["grid_points"])
    c_bound = amplified_completeness_bound(c, s, m)
    s_bound = amplified_soundness_bound(s, m, 1)
    emit("yes_value", yes.value, yes.gap)
    emit("completeness_bound", c_bound)
    emit("no_value", no.value, no.gap)
    emit("soundness_bound", s_bound)
    ok &= yes.value >= c_bound - yes.gap
    ok &= no.value <= s_bound + no.gap
    game = one_sided_amplify(yes_spec)

    def trial(t, rng):
        psi1 = random_state(2, rng).amplitudes
        cond = np.einsum("a,aibj,b->ij", psi1.conj(), yes_op.matrix.reshape(2, 2, 2, 2), psi1)
        w, v = np.linalg.eigh(cond)
        proofs = amplified_honest_proof(yes_spec, [psi1, v[:, -1]])
        return accept_probability(game.accept, proofs)

    honest = _map_trials(trial, cfg)
    emit("honest_min_acceptance", min(honest))
    ok &= min(honest) >= c_bound - 1e-9
    if not ok:
        raise InvariantViolation("amplified game value outside its bounds", rows)
    return rows


_QCPH_TABLES = {
    "yes": [[0.95, 0.05], [0.1, 0.9]],
    "no": [[0.1, 0.05], [0.9, 0.95]],
}


def _table_op(table) -> AcceptOperator:
    arr = np.asarray(table, dtype=float)
    return AcceptOperator(np.diag(arr.reshape(-1)).astype(complex), arr.shape)


def _qcph_check(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    m = p["m"]
    yes_table = p["yes_table"] or _QCPH_TABLES["yes"]
    no_table = p["no_table"] or _QCPH_TABLES["no"]
    rows: list[ResultRow] = []
    ok = True

    def emit(metric, value, err=None):
        rows.append(ResultRow(cfg.experiment, p, metric, float(value), err, cfg.seed))

    yes_spec = SimulationGameSpec(_table_op(yes_table), (1, 1), m)
    no_spec = SimulationGameSpec(_table_op(no_table), (1, 1), m)
    c = classical_game_value(yes_spec.classical_game)
    s = classical_game_value(no_spec.classical_game)
    emit("c", c)
    emit("s", s)
    yes = quantum_game_value(qcph_to_qphpure_transform(yes_spec), grid_points=p["grid_points"])
    no = quantum_game_value(qcph_to_qphpure_transform(no_spec), grid_points=p["grid_points"])
    c_prime = simulation_completeness_bound(c, m)
    s_prime = simulation_soundness_bound(s, m, 1)
    emit("yes_value", yes.value, yes.gap)
    emit("c_prime", c_prime)
    emit("no_value", no.value, no.gap)
    emit("s_prime", s_prime)
    ok &= yes.value >= c_prime - yes.gap
    ok &= no.value <= s_prime + no.gap
    meas = measurement_branch_operator(yes_spec).matrix
    off = float(np.max(np.abs(meas - np.diag(np.diag(meas)))))
    emit("meas_offdiag_max", off)
    ok &= off < 1e-12
    meas_op = measurement_branch_operator(yes_spec)

    def trial(t, rng):
        psi1 = random_state(2, rng).amplitudes
        proofs = qcph_honest_proof(yes_spec, [psi1])
        reject = 1.0 - accept_probability(meas_op, proofs)
        pmax = float(np.max(np.abs(psi1) ** 2))
        return measurement_reject_bound(pmax, c, m) - reject

    margins = _map_trials(trial, cfg)
    emit("reject_bound_min_margin", min(margins))
    ok &= min(margins) >= -1e-9
    if not ok:
        raise InvariantViolation("simulation game outside its bounds", rows)
    return rows


def isolation_instance(ell: int, witnesses: int, seed: int) -> iso.TqcmappInstance:
    """Deterministic toy instance with the requested number of witnesses."""
    rng = np.random.default_rng([int(seed), int(ell), int(witnesses)])
    chosen = sorted(rng.choice(2**ell, size=witnesses, replace=False).tolist())
    circuit = iso.witness_set_circuit(ell, chosen)
    p1, p2 = iso.qckl_thresholds(ell)
    return iso.TqcmappInstance(circuit, "", p1, p2, ell)


def _isolation_frequency(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    ell = p["ell"]
    rows = []
    ok = True
    for w in p["witnesses"]:
        w_eff = 2**ell if w <= 0 else w
        inst = isolation_instance(ell, w_eff, cfg.seed)
        est = iso.isolation_frequency(inst, cfg.trials, cfg.seed, cfg.workers)
        cell = dict(p, witness_count=w_eff)
        rows.append(ResultRow(cfg.experiment, cell, "frequency", est.rate, est.stderr, cfg.seed))
        rows.append(ResultRow(cfg.experiment, cell, "lower99", est.lower(0.99), None, cfg.seed))
        rows.append(ResultRow(cfg.experiment, cell, "floor", iso.isolation_floor(ell), None, cfg.seed))
        ok &= est.lower(0.99) >= iso.isolation_floor(ell)
    if not ok:
        raise InvariantViolation("isolation frequency below its floor", rows)
    return rows


def _bv_noise_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    rows = []
    ok = True
    for n in p["n"]:
        eta = p["eta"] if p["eta"] >= 0 else 2.0**-n
        oracle = iso.NoisyDecisionOracle(eta=eta)
        # hidden string fixed per n so the sweep is reproducible
        s = iso.bits_of(int(np.random.default_rng([cfg.seed, n]).integers(2**n)), n)
        dist = oracle.bv_distribution(iso.parity_table(s))
        cdf = np.cumsum(dist)
        cdf[-1] = 1.0
        target = int(s, 2)

        def block(rng, size):
            return np.searchsorted(cdf, rng.random(size), side="right") == target

        hits = iso._run_blocks(block, cfg.trials, cfg.seed + n, cfg.workers)
        est = iso.FrequencyEstimate(int(hits.sum()), cfg.trials)
        cell = dict(p, n=n, eta=eta)
        rows.append(ResultRow(cfg.experiment, cell, "success_rate", est.rate, est.stderr, cfg.seed))
        rows.append(ResultRow(cfg.experiment, cell, "lower99", est.lower(0.99), None, cfg.seed))
        rows.append(ResultRow(cfg.experiment, cell, "bound", iso.approx_bv_bound(n), None, cfg.seed))
        if eta <= 2.0**-n:
            ok &= est.lower(0.99) >= iso.approx_bv_bound(n)
    if not ok:
        raise InvariantViolation("BV success rate below its bound", rows)
    return rows


def _game_value(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    prefix = tuple(p["prefix"])
    _require(all(q in "EA" for q in prefix) and len(prefix) == 2, "prefix must be two of E/A")
    op = swap_test_operator(2)
    res = quantum_game_value(QuantifiedGame(op, prefix), mode=p["mode"], grid_points=p["grid_points"],
                             rng=trial_rng(cfg.seed, 0))
    rows = [ResultRow(cfg.experiment, p, "value", res.value, None if math.isnan(res.gap) else res.gap, cfg.seed)]
    if res.certified:
        rows.append(ResultRow(cfg.experiment, p, "lower", res.lower, None, cfg.seed))
        rows.append(ResultRow(cfg.experiment, p, "upper", res.upper, None, cfg.seed))
    return rows


def _measurement_lemma_scan(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    rows = []
    ok = True
    for d in p["dims"]:
        def trial(t, rng, d=d):
            psi = random_state(d, rng).amplitudes
            phi = nearby_state(psi, float(rng.uniform(0, p["max_scale"])), rng)
            proj = random_projector(d, int(rng.integers(1, d + 1)), rng)
            lhs, eps = projected_trace_gap(proj, psi, phi)
            return 2 * eps - lhs

        margins = _map_trials(trial, cfg)
        cell = dict(p, d=d)
        worst = min(margins)
        rows.append(ResultRow(cfg.experiment, cell, "min_margin", worst, None, cfg.seed))
        rows.append(ResultRow(cfg.experiment, cell, "violations", float(sum(mg < -1e-8 for mg in margins)), None, cfg.seed))
        ok &= worst >= -1e-8
    if not ok:
        raise InvariantViolation("measurement bound violated", rows)
    return rows


def _qckl_pipeline(cfg: ExperimentConfig) -> list[ResultRow]:
    p = cfg.params
    ell = p["ell"]
    patterns = [iso.bits_of(v, ell) for v in sorted({0, 3, 10 % 2**ell})]
    verifier = iso.relative_witness_circuit(ell, patterns)
    decider = iso.CircuitDecider(coins=ell)
    y1 = iso.bits_of(int(np.random.default_rng([cfg.seed, ell]).integers(2**ell)), ell)
    rows = []
    yes = iso.qckl_trials("1", y1, verifier, decider, cfg.trials, cfg.seed, cfg.workers)
    no = iso.qckl_trials("0", y1, verifier, decider, cfg.trials, cfg.seed + 1, cfg.workers)
    ey = iso.FrequencyEstimate(int(yes.sum()), cfg.trials)
    en = iso.FrequencyEstimate(int(no.sum()), cfg.trials)
    rows.append(ResultRow(cfg.experiment, p, "yes_acceptance", ey.rate, ey.stderr, cfg.seed))
    rows.append(ResultRow(cfg.experiment, p, "yes_lower99", ey.lower(), None, cfg.seed))
    rows.append(ResultRow(cfg.experiment, p, "yes_bound", iso.qckl_bound(ell), None, cfg.seed))
    rows.append(ResultRow(cfg.experiment, p, "no_acceptance", en.rate, en.stderr, cfg.seed))
    rows.append(ResultRow(cfg.experiment, p, "no_bound", 1 / ell**4, None, cfg.seed))
    if ey.lower() < iso.qckl_bound(ell) or en.rate > 1 / ell**4 + 1e-3:
        raise InvariantViolation("composed verifier outside its bounds", rows)
    return rows


def _check_apt(p):
    _require(p["n"] >= 1 and p["m"] >= 1 and p["extra_dim"] >= 1, "n, m, extra_dim must be >= 1")
    _require(2 ** p["n"] * 2 ** (p["n"] * p["m"]) * p["extra_dim"] <= 2**12, "layout too large")
    _require(p["grid_points"] >= 16, "grid_points must be >= 16")


def _check_amp(p):
    _require(0 <= p["s"] < p["c"] <= 1, "need 0 <= s < c <= 1")
    _require(1 <= p["m"] <= 4, "m must lie in 1..4")
    _require(p["grid_points"] >= 16, "grid_points must be >= 16")


def _check_qcph(p):
    _require(1 <= p["m"] <= 6, "m must lie in 1..6")
    _require(p["grid_points"] >= 16, "grid_points must be >= 16")
    for key in ("yes_table", "no_table"):
        if p[key]:
            arr = np.asarray(p[key])
            _require(bool(np.all((arr >= 0) & (arr <= 1))), f"{key} entries must lie in [0, 1]")


def _check_iso(p):
    _require(1 <= p["ell"] <= 8, "ell must lie in 1..8")
    _require(all(w <= 2 ** p["ell"] for w in p["witnesses"]), "more witnesses than strings")


def _check_bv(p):
    _require(all(1 <= n <= 12 for n in p["n"]), "n must lie in 1..12")
    _require(p["eta"] < 0.5, "eta must be < 1/2 (negative selects 2^-n)")


def _check_game(p):
    _require(p["mode"] in ("certified", "heuristic"), "mode must be certified or heuristic")
    _require(p["grid_points"] >= 16, "grid_points must be >= 16")


def _check_meas(p):
    _require(all(2 <= d <= 64 for d in p["dims"]), "dims must lie in 2..64")
    _require(0 < p["max_scale"] <= 2, "max_scale must lie in (0, 2]")


def _check_qckl(p):
    _require(2 <= p["ell"] <= 5, "ell must lie in 2..5")


EXPERIMENTS: dict[str, Experiment] = {
    "apt-bound-scan": Experiment(
        _apt_bound_scan,
        {"n": ("int", 1), "m": ("int", 1), "extra_dim": ("int", 1), "grid_points": ("int", 10_000)},
        500,
        _check_apt,
    ),
    "amplification-check": Experiment(
        _amplification_check,
        {"c": ("float", 0.9), "s": ("float", 0.6), "m": ("int", 2), "grid_points": ("int", 10_000)},
        20,
        _check_amp,
    ),
    "qcph-simulation-check": Experiment(
        _qcph_check,
        {"m": ("int", 1), "grid_points": ("int", 10_000), "yes_table": ("table?", None), "no_table": ("table?", None)},
        50,
        _check_qcph,
    ),
    "isolation-frequency": Experiment(
        _isolation_frequency,
        {"ell": ("int", 3), "witnesses": ("ints", [1, 2, 5, 0])},
        100_000,
        _check_iso,
    ),
    "bv-noise-sweep": Experiment(
        _bv_noise_sweep,
        {"n": ("ints", [4, 5, 6, 7, 8, 9, 10]), "eta": ("float", -1.0)},
        10_000,
        _check_bv,
    ),
    "game-value": Experiment(
        _game_value,
        {"prefix": ("str", "EA"), "mode": ("str", "certified"), "grid_points": ("int", 10_000)},
        1,
        _check_game,
    ),
    "measurement-lemma-scan": Experiment(
        _measurement_lemma_scan,
        {"dims": ("ints", [2, 4, 8]), "max_scale": ("float", 0.5)},
        1000,
        _check_meas,
    ),
    "qckl-pipeline": Experiment(
        _qckl_pipeline,
        {"ell": ("int", 4)},
        1_000_000,
        _check_qckl,
    ),
}


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    cfg = config.resolved()
    return EXPERIMENTS[cfg.experiment].run(cfg)


# ---------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def rows_to_csv(rows: list[ResultRow]) -> str:
    if not rows:
        raise ValueError("no rows to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        params = json.dumps(r.params, sort_keys=True, separators=(",", ":"))
        w.writerow([r.experiment, params, r.metric, _fmt(r.value), "" if r.stderr is None else _fmt(r.stderr), r.seed])
    return buf.getvalue()


def emit_csv(rows: list[ResultRow], path: str) -> None:
    text = rows_to_csv(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv(path_or_text: str, is_text: bool = False) -> list[ResultRow]:
    if is_text:
        text = path_or_text
    else:
        with open(path_or_text, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    out = []
    for rec in reader:
        exp, params, metric, value, stderr, seed = rec
        out.append(ResultRow(exp, json.loads(params), metric, float(value), float(stderr) if stderr else None, int(seed)))
    return out
