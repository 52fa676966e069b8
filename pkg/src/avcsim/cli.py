"""Batch experiment driver.

Subcommands: capacity, rateless-std, rateless-dep, audit, sweep,
brute-force. A JSON config file supplies defaults; command-line flags
override individual fields. Every run is pinned to an explicit seed (no
wall-clock entropy) and emits machine-readable artifacts: summary.json
carrying the resolved config and its hash, traces.csv / traces.jsonl
with one record per session, and sweep.csv for parameter sweeps. Rates
are bits per channel use, decode times are chunk counts; no plotting.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .avc import Avc, PRESETS, load_avc
from .capacity import SaddleResult, capacity_dep, capacity_std
from .codebook import KeyedCodebookFamily, _ceil_exp2, scaling_params
from .harness import (TRACE_COLUMNS, ErrorEstimate, SessionSpec, SessionTrace,
                      audit_decoding_time, audit_list_sizes,
                      brute_force_max_error, estimate_error, trace_to_row)
from .jammer import JammerStrategy, worst_case_dependent_strategy

SWEEP_COLUMNS = (
    "axis", "value", "metric_kind", "metric", "ci_lo", "ci_hi",
    "mean_decode_time_chunks", "mean_empirical_rate_bits_per_use",
)


class ConfigError(ValueError):
    """Config validation failure; message lists offending field paths."""


@dataclass
class ExperimentConfig:
    """Flat experiment description; field names double as config paths."""

    seed: int | None = None
    avc: str = "bitflip"
    mode: str = "rateless_std"         # rateless_std | rateless_dep
    model: str = "std"                 # capacity subcommand: std | dep
    Lambda: float = 0.1
    tol: float = 1e-6
    n: int = 256
    R_min: float = 0.1
    R_max: float = 0.5
    P: list | None = None              # input distribution; default uniform
    K: int = 64
    codebook_seed: int | None = None   # defaults to seed
    delta: float = 0.05
    eps: float = 0.05
    xi: float = 0.0625
    delta_filter: float = 0.5
    csi_epsilon: float = 0.0
    csi_max_set: int = 4
    csi_cost_cap: float | None = None
    csi_pool: int = 64
    csi_attempts: int = 16
    use_auth: bool = False
    strategy: dict | None = None       # {"kind": ..., ...}; default worst_dep
    trials: int = 1000
    messages_sampled: int = 10
    workers: int = 1
    exact_cap: int = 4096
    force_decode_at_hi: bool = False
    # Explicit geometry escape hatch, mainly for tiny brute-force runs
    # where the n**(1/4) chunk rule does not apply.
    chunk_len: int | None = None
    M_hi: int | None = None
    N_override: int | None = None

    def validate(self) -> list[str]:
        problems = []
        if self.seed is None:
            problems.append("seed: required (runs must be reproducible)")
        elif self.seed < 0:
            problems.append("seed: must be nonnegative")
        if self.codebook_seed is not None and self.codebook_seed < 0:
            problems.append("codebook_seed: must be nonnegative")
        if self.mode not in ("rateless_std", "rateless_dep"):
            problems.append("mode: must be rateless_std or rateless_dep")
        if self.model not in ("std", "dep"):
            problems.append("model: must be std or dep")
        if not 0 <= self.Lambda:
            problems.append("Lambda: must be nonnegative")
        if self.tol <= 0:
            problems.append("tol: must be positive")
        if self.n < 16:
            problems.append("n: must be at least 16")
        if not 0 < self.R_min <= self.R_max:
            problems.append("R_min: need 0 < R_min <= R_max")
        if self.K < 1:
            problems.append("K: must be positive")
        if self.trials < 0:
            problems.append("trials: must be nonnegative")
        if self.messages_sampled < 1:
            problems.append("messages_sampled: must be positive")
        if self.workers < 1:
            problems.append("workers: must be positive")
        if (self.chunk_len is None) != (self.M_hi is None):
            problems.append("chunk_len: set together with M_hi")
        if self.chunk_len is not None and self.chunk_len < 1:
            problems.append("chunk_len: must be positive")
        if self.M_hi is not None and self.M_hi < 1:
            problems.append("M_hi: must be positive")
        if self.N_override is not None and self.N_override < 2:
            problems.append("N_override: must be at least 2")
        if self.avc not in PRESETS and not Path(self.avc).exists():
            problems.append(f"avc: unknown preset or missing file '{self.avc}'")
        if self.strategy is not None:
            kind = self.strategy.get("kind")
            known = ("fixed_sequence", "iid_mixture", "memoryless_dependent",
                     "greedy_dependent", "worst_dep")
            if kind not in known:
                problems.append(f"strategy.kind: must be one of {known}")
        return problems


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config: file not found '{path}'")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})")
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("; ".join(f"{k}: unknown field" for k in unknown))
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    cfg = ExperimentConfig(**data)
    problems = cfg.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _composition(P: np.ndarray, c: int) -> tuple[int, ...]:
    counts = np.rint(P * c).astype(int)
    if counts.sum() != c or (counts < 0).any():
        raise ConfigError(
            f"P: composition {P.tolist()} is not realizable at chunk length {c}")
    if not np.allclose(counts / c, P, atol=1e-9):
        raise ConfigError(
            f"P: entries must be multiples of 1/c = 1/{c} for per-chunk composition")
    return tuple(int(v) for v in counts)


def _resolve_strategy(cfg: ExperimentConfig, avc: Avc, P: np.ndarray) -> JammerStrategy:
    spec = cfg.strategy or {"kind": "worst_dep"}
    kind = spec["kind"]
    if kind == "worst_dep":
        return worst_case_dependent_strategy(avc, P, cfg.Lambda)
    if kind == "fixed_sequence":
        if "sequence" not in spec:
            raise ConfigError("strategy.sequence: required for fixed_sequence")
        return JammerStrategy(kind=kind,
                              sequence=np.asarray(spec["sequence"], dtype=np.int64))
    if kind == "iid_mixture":
        if "mixture" not in spec:
            raise ConfigError("strategy.mixture: required for iid_mixture")
        return JammerStrategy(kind=kind, mixture=np.asarray(spec["mixture"], dtype=float))
    if kind == "memoryless_dependent":
        if "kernel" not in spec:
            raise ConfigError("strategy.kernel: required for memoryless_dependent")
        return JammerStrategy(kind=kind, kernel=np.asarray(spec["kernel"], dtype=float))
    return JammerStrategy(kind="greedy_dependent")


def build_session_spec(cfg: ExperimentConfig) -> SessionSpec:
    avc = load_avc(cfg.avc)
    if cfg.chunk_len is not None and cfg.M_hi is not None:
        c, M_hi = cfg.chunk_len, cfg.M_hi
        M_lo = max(1, math.ceil((cfg.R_min / cfg.R_max) * M_hi - 1e-12))
        if cfg.N_override is not None:
            N = cfg.N_override
        else:
            N = max(_ceil_exp2(c * M_hi * cfg.R_min), 2)
    else:
        c, M_hi, M_lo, N = scaling_params(cfg.n, cfg.R_min, cfg.R_max)
        if cfg.N_override is not None:
            N = cfg.N_override
    if cfg.P is None:
        if c % avc.num_inputs != 0:
            raise ConfigError(
                f"P: default uniform needs chunk length {c} divisible by |X| = {avc.num_inputs}")
        P = np.full(avc.num_inputs, 1.0 / avc.num_inputs)
    else:
        P = np.asarray(cfg.P, dtype=float)
        if P.size != avc.num_inputs:
            raise ConfigError(f"P: needs {avc.num_inputs} entries")
    comp = _composition(P, c)
    cb_seed = cfg.codebook_seed if cfg.codebook_seed is not None else cfg.seed
    family = KeyedCodebookFamily(
        composition=comp, M_hi=M_hi, N=N, seed=int(cb_seed), K=cfg.K, M_lo=M_lo)
    strategy = _resolve_strategy(cfg, avc, P)
    return SessionSpec(
        avc=avc, family=family, Lambda=cfg.Lambda, strategy=strategy,
        mode="dep" if cfg.mode == "rateless_dep" else "std",
        delta=cfg.delta, eps=cfg.eps, xi=cfg.xi, delta_filter=cfg.delta_filter,
        csi_epsilon=cfg.csi_epsilon, csi_max_set=cfg.csi_max_set,
        csi_cost_cap=cfg.csi_cost_cap, csi_pool=cfg.csi_pool,
        csi_attempts=cfg.csi_attempts, use_auth=cfg.use_auth,
        exact_cap=cfg.exact_cap, force_decode_at_hi=cfg.force_decode_at_hi)


def _write_traces(out_dir: Path, traces: list[SessionTrace]) -> None:
    with open(out_dir / "traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for tr in traces:
            writer.writerow(trace_to_row(tr))
    with open(out_dir / "traces.jsonl", "w") as fh:
        for tr in traces:
            rec = dict(zip(TRACE_COLUMNS, trace_to_row(tr)))
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _write_summary(out_dir: Path, cfg: ExperimentConfig, payload: dict) -> None:
    doc = {
        "config": asdict(cfg),
        "config_hash": config_hash(cfg),
        "units": {"rate": "bits/channel-use", "capacity": "bits/channel-use",
                  "decode_time": "chunks"},
    }
    doc.update(payload)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _estimate_payload(est: ErrorEstimate | None) -> dict:
    if est is None:
        return {"error_estimate": None}
    decoded = [t for t in est.traces if t.decode_time is not None]
    mean_time = (sum(t.decode_time for t in decoded) / len(decoded)) if decoded else None
    rates = [t.empirical_rate for t in decoded if t.empirical_rate is not None]
    mean_rate = (sum(rates) / len(rates)) if rates else None
    return {"error_estimate": {
        "point": est.point,
        "wilson_lo": est.wilson_lo,
        "wilson_hi": est.wilson_hi,
        "argmax_message": str(est.argmax_message),
        "trials_per_message": est.trials_per_message,
        "messages": [str(m) for (m, _t, _f) in est.per_message],
        "failures": [f for (_m, _t, f) in est.per_message],
        "outages": sum(t.outage for t in est.traces),
        "mean_decode_time_chunks": mean_time,
        "mean_empirical_rate_bits_per_use": mean_rate,
    }}


def _cmd_capacity(cfg: ExperimentConfig, out_dir: Path | None) -> int:
    avc = load_avc(cfg.avc)
    solve = capacity_std if cfg.model == "std" else capacity_dep
    result: SaddleResult = solve(avc, cfg.Lambda, tol=cfg.tol)
    mixing = result.minimizer
    doc = {
        "value": result.value,
        "P_star": result.P_star.tolist(),
        "mixing": mixing.tolist() if mixing is not None else None,
        "diagnostics": {"inner_gap": result.inner_gap,
                        "outer_gap": result.outer_gap, "tol": cfg.tol},
        "units": "bits/channel-use",
    }
    print(json.dumps(doc, sort_keys=True))
    if out_dir is not None:
        _write_summary(out_dir, cfg, {"capacity": doc})
    return 0


def _cmd_rateless(cfg: ExperimentConfig, out_dir: Path) -> int:
    spec = build_session_spec(cfg)
    if cfg.trials == 0:
        _write_traces(out_dir, [])
        _write_summary(out_dir, cfg, _estimate_payload(None))
        print("config valid; no trials requested")
        return 0
    est = estimate_error(spec, cfg.trials, cfg.messages_sampled, cfg.seed,
                         workers=cfg.workers)
    _write_traces(out_dir, est.traces)
    _write_summary(out_dir, cfg, _estimate_payload(est))
    print(f"max per-message error {est.point:.6g} "
          f"(wilson [{est.wilson_lo:.6g}, {est.wilson_hi:.6g}]) "
          f"over {cfg.messages_sampled} messages x {cfg.trials} trials")
    return 0


def _cmd_audit(cfg: ExperimentConfig, out_dir: Path) -> int:
    spec = build_session_spec(cfg)
    est = estimate_error(spec, cfg.trials, cfg.messages_sampled, cfg.seed,
                         workers=cfg.workers, exact_key_average=False)
    timing = audit_decoding_time(spec, est.traces)
    payload = {"decode_time_audit": {
        "checked": timing.checked,
        "mismatches": list(timing.mismatches),
        "bracket_violations": list(timing.bracket_violations),
        "csi_contract_failures": list(timing.csi_contract_failures),
    }}
    if spec.mode == "dep":
        lists = audit_list_sizes(spec, cfg.trials, cfg.messages_sampled,
                                 cfg.seed, workers=cfg.workers)
        payload["list_size_audit"] = {
            "trials": lists.trials, "max_list": lists.max_list,
            "bound": lists.bound, "within_bound": lists.within_bound,
            "sizes": [list(p) for p in lists.sizes],
        }
    _write_traces(out_dir, est.traces)
    _write_summary(out_dir, cfg, payload)
    ok = not timing.mismatches and not timing.bracket_violations
    print(f"decode-time audit: {timing.checked} traces, "
          f"{len(timing.mismatches)} mismatches, "
          f"{len(timing.bracket_violations)} bracket violations")
    return 0 if ok else 1


def _cmd_brute_force(cfg: ExperimentConfig, out_dir: Path) -> int:
    spec = build_session_spec(cfg)
    std = brute_force_max_error(spec, "standard")
    nosy = brute_force_max_error(spec, "nosy")
    payload = {"brute_force": {
        "standard": {"max_error": std.max_error,
                     "argmax_message": std.argmax_message,
                     "worst_state": list(std.worst_state) if std.worst_state else None,
                     "per_message": list(std.per_message)},
        "nosy": {"max_error": nosy.max_error,
                 "argmax_message": nosy.argmax_message,
                 "per_message": list(nosy.per_message)},
    }}
    _write_summary(out_dir, cfg, payload)
    print(f"standard max error {std.max_error:.6g}, nosy {nosy.max_error:.6g}")
    return 0


def _apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    data = asdict(cfg)
    if axis == "Lambda":
        data["Lambda"] = float(value)
    elif axis == "K":
        data["K"] = int(value)
    else:
        data["n"] = int(value)
    return ExperimentConfig(**data)


def _cmd_sweep(cfg: ExperimentConfig, out_dir: Path, axis: str,
               values: list[float], capacity_mode: bool) -> int:
    rows = []
    for v in values:
        point = _apply_axis(cfg, axis, v)
        if capacity_mode:
            avc = load_avc(point.avc)
            solve = capacity_std if point.model == "std" else capacity_dep
            res = solve(avc, point.Lambda, tol=point.tol)
            rows.append([axis, repr(float(v)), "capacity", repr(res.value),
                         "", "", "", ""])
        else:
            spec = build_session_spec(point)
            est = estimate_error(spec, point.trials, point.messages_sampled,
                                 point.seed, workers=point.workers)
            decoded = [t for t in est.traces if t.decode_time is not None]
            mean_time = (sum(t.decode_time for t in decoded) / len(decoded)) if decoded else ""
            rates = [t.empirical_rate for t in decoded if t.empirical_rate is not None]
            mean_rate = (sum(rates) / len(rates)) if rates else ""
            rows.append([axis, repr(float(v)), "error", repr(est.point),
                         repr(est.wilson_lo), repr(est.wilson_hi),
                         repr(mean_time) if mean_time != "" else "",
                         repr(mean_rate) if mean_rate != "" else ""])
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        writer.writerows(rows)
    _write_summary(out_dir, cfg, {"sweep": {
        "axis": axis, "values": [float(v) for v in values],
        "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]}})
    print(f"sweep over {axis}: {len(rows)} rows -> {out_dir / 'sweep.csv'}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override fields")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--avc")
    parser.add_argument("--lambda", dest="Lambda", type=float)
    parser.add_argument("--n", type=int)
    parser.add_argument("--r-min", dest="R_min", type=float)
    parser.add_argument("--r-max", dest="R_max", type=float)
    parser.add_argument("--k", dest="K", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--messages-sampled", dest="messages_sampled", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--xi", type=float)
    parser.add_argument("--out", default=".", help="output directory for artifacts")


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "avc", "Lambda", "n", "R_min", "R_max", "K", "trials",
            "messages_sampled", "workers", "delta", "eps", "xi", "model", "tol",
            "mode")
    out = {}
    for k in keys:
        if hasattr(args, k):
            out[k] = getattr(args, k)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="avcsim",
        description="Rateless coding over adversarial channels: solvers and simulators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cap = sub.add_parser("capacity", help="max-min mutual information solves")
    _add_common(p_cap)
    p_cap.add_argument("--model", choices=("std", "dep"))
    p_cap.add_argument("--tol", type=float)

    p_std = sub.add_parser("rateless-std", help="threshold-rule sessions, cost CSI")
    _add_common(p_std)
    p_dep = sub.add_parser("rateless-dep", help="list-decoding sessions, channel CSI")
    _add_common(p_dep)

    p_audit = sub.add_parser("audit", help="replay stopping rules and list sizes")
    _add_common(p_audit)

    p_sweep = sub.add_parser("sweep", help="one row per axis value")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=("Lambda", "K", "n"), required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--capacity", action="store_true",
                         help="sweep the capacity value instead of session error")
    p_sweep.add_argument("--model", choices=("std", "dep"))
    p_sweep.add_argument("--tol", type=float)

    p_bf = sub.add_parser("brute-force", help="exact maximal error, tiny blocks")
    _add_common(p_bf)

    args = parser.parse_args(argv)
    try:
        overrides = _overrides(args)
        if args.command == "rateless-std":
            overrides["mode"] = "rateless_std"
        elif args.command == "rateless-dep":
            overrides["mode"] = "rateless_dep"
        cfg = load_config(args.config, overrides)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "capacity":
            return _cmd_capacity(cfg, out_dir)
        if args.command in ("rateless-std", "rateless-dep"):
            return _cmd_rateless(cfg, out_dir)
        if args.command == "audit":
            return _cmd_audit(cfg, out_dir)
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("values: at least one axis value required")
            return _cmd_sweep(cfg, out_dir, args.axis, values, args.capacity)
        if args.command == "brute-force":
            return _cmd_brute_force(cfg, out_dir)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
