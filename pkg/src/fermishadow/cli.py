"""Command-line entry points: estimate, variance-sweep, validate, slater-overlap.

Configuration is a single JSON file plus flag overrides; given a seed, every
output byte is reproducible.  Exit codes: 0 success, 1 validation failure,
2 configuration error.
"""

import argparse
import csv
import json
import subprocess
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .combinat import binom, rank_subset, subsets, validate_subset
from .fock import (
    FermionState,
    apply_rotation,
    basis_state,
    expectation_rdm,
    random_state,
    rdm_matrix,
    slater_superposition,
    state_from_json,
)
from .shadows import (
    avg_shadow_norm_sq,
    batch_estimate_matrices,
    collect_shadow_arrays,
    estimation_matrix,
    q_value,
    trace_e_squared,
    variance_bound,
)
from .fastpath import fast_estimate_rdm
from .shadows import ClassicalShadow


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


@dataclass
class ExperimentConfig:
    """One run: sizes, sampling budget, state, estimator, aggregation, targets."""

    n: int
    eta: int
    k: int
    samples: int
    seed: int
    state_source: str = "random_pure"
    estimator: str = "dense"
    aggregation: str = "mean"
    targets: object = "all_krdm"

    def validate(self):
        if not (isinstance(self.n, int) and isinstance(self.eta, int) and isinstance(self.k, int)):
            raise ConfigError("n, eta, k must be integers")
        if not 0 <= self.k <= self.eta <= self.n:
            raise ConfigError(f"need 0 <= k <= eta <= n, got n={self.n} eta={self.eta} k={self.k}")
        if not (isinstance(self.samples, int) and self.samples >= 1):
            raise ConfigError(f"samples must be a positive integer, got {self.samples!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        src = self.state_source
        if not (src == "random_pure" or src.startswith("basis:") or src.startswith("file:")):
            raise ConfigError(f"state_source must be random_pure, basis:..., or file:..., got {src!r}")
        if self.estimator not in ("dense", "fast", "both"):
            raise ConfigError(f"estimator must be dense, fast, or both, got {self.estimator!r}")
        agg = self.aggregation
        if agg != "mean" and not agg.startswith("median_of_means:"):
            raise ConfigError(f"aggregation must be mean or median_of_means:B, got {agg!r}")
        if agg.startswith("median_of_means:"):
            try:
                b = int(agg.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad batch count in {agg!r}") from None
            if b < 1 or self.samples % b != 0:
                raise ConfigError(f"batches must divide samples, got {agg!r} with samples={self.samples}")
        if self.targets not in ("all_krdm", "slater_overlaps") and not isinstance(self.targets, list):
            raise ConfigError(f"targets must be all_krdm, slater_overlaps, or a pair list, got {self.targets!r}")


def _state_rng(seed: int) -> np.random.Generator:
    """Generator for state preparation, disjoint from the shadow streams."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, 2**64 - 1], dtype=np.uint64)))


def build_state(config: ExperimentConfig) -> FermionState:
    """Materialize the input state named by config.state_source."""
    src = config.state_source
    if src == "random_pure":
        return random_state(config.n, config.eta, _state_rng(config.seed))
    if src.startswith("basis:"):
        try:
            z = tuple(int(tok) for tok in src[len("basis:"):].split(",") if tok)
        except ValueError:
            raise ConfigError(f"bad basis modes in {src!r}") from None
        if len(z) != config.eta:
            raise ConfigError(f"basis state has {len(z)} modes, config says eta={config.eta}")
        try:
            return basis_state(z, config.n)
        except AssertionError:
            raise ConfigError(f"invalid basis subset {z} for n={config.n}") from None
    path = src[len("file:"):]
    try:
        with open(path) as fh:
            state = state_from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load state from {path}: {exc}") from None
    if (state.n, state.eta) != (config.n, config.eta):
        raise ConfigError(
            f"state file has n={state.n} eta={state.eta}, config says n={config.n} eta={config.eta}"
        )
    return state


def _resolve_targets(config: ExperimentConfig):
    """List of (p, q) subset pairs to estimate, in deterministic order."""
    if config.targets == "all_krdm":
        ss = list(subsets(config.n, config.k))
        return [(p, q) for p in ss for q in ss]
    if config.targets == "slater_overlaps":
        raise ConfigError("targets=slater_overlaps belongs to the slater-overlap command")
    out = []
    for item in config.targets:
        try:
            p, q = item
            p = validate_subset(tuple(int(m) for m in p), config.n)
            q = validate_subset(tuple(int(m) for m in q), config.n)
        except (TypeError, ValueError, AssertionError):
            raise ConfigError(f"bad target pair {item!r}") from None
        if len(p) != config.k or len(q) != config.k:
            raise ConfigError(f"target pair {item!r} is not a pair of {config.k}-subsets")
        out.append((p, q))
    return out


def _aggregate_columns(values: np.ndarray, aggregation: str):
    """(value, stderr) complex pair for one target's per-shadow estimates."""
    from .shadows import aggregate

    if aggregation == "mean":
        return aggregate(values, "mean")
    batches = int(aggregation.split(":", 1)[1])
    return aggregate(values, "median_of_means", batches)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _subset_str(z) -> str:
    return "+".join(str(m) for m in z)


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
        )
        return out.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        return None


def _write_rows(rows: list, header: list, out: str, fmt: str, manifest: dict):
    """Emit rows as CSV or JSON; manifest goes next to a file, stdout otherwise."""
    if fmt == "csv":
        def dump(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    else:
        def dump(fh):
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=2)
            fh.write("\n")
    if out:
        path = out if out.endswith("." + fmt) else out + "." + fmt
        with open(path, "w", newline="") as fh:
            dump(fh)
        manifest = dict(manifest, rows=len(rows), output=path)
        mpath = (out[: -len("." + fmt)] if out.endswith("." + fmt) else out) + ".manifest.json"
        with open(mpath, "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
        print(f"wrote {path} ({len(rows)} rows) and {mpath}")
    else:
        dump(sys.stdout)


def cmd_estimate(config: ExperimentConfig, out: str = None, fmt: str = "csv") -> int:
    """Collect shadows, estimate the requested transitions, write rows."""
    config.validate()
    t0 = time.monotonic()
    state = build_state(config)
    targets = _resolve_targets(config)
    n, eta, k = config.n, config.eta, config.k

    us, zs = collect_shadow_arrays(state, config.samples, config.seed)
    dense = None
    if config.estimator in ("dense", "both"):
        ests = batch_estimate_matrices(us, zs, eta, k)
        dense = {
            (p, q): ests[:, rank_subset(p), rank_subset(q)] for p, q in set(targets)
        }
    fast = None
    if config.estimator in ("fast", "both"):
        fast = {}
        for p, q in set(targets):
            vals = np.empty(config.samples, dtype=np.complex128)
            for i in range(config.samples):
                sh = ClassicalShadow(us[i], tuple(int(m) for m in zs[i]), config.seed, i)
                vals[i] = fast_estimate_rdm(sh, eta, k, p, q)
            fast[(p, q)] = vals

    header = ["p", "q", "estimate_re", "estimate_im", "stderr_re", "stderr_im"]
    if config.estimator == "both":
        header += ["fast_estimate_re", "fast_estimate_im"]
    rows = []
    mismatch = 0.0
    for p, q in targets:
        primary = dense if dense is not None else fast
        val, err = _aggregate_columns(primary[(p, q)], config.aggregation)
        row = [_subset_str(p), _subset_str(q),
               _fmt(val.real), _fmt(val.imag), _fmt(err.real), _fmt(err.imag)]
        if config.estimator == "both":
            fval, _ = _aggregate_columns(fast[(p, q)], config.aggregation)
            row += [_fmt(fval.real), _fmt(fval.imag)]
            mismatch = max(mismatch, abs(fval - val))
        rows.append(row)

    manifest = {
        "command": "estimate",
        "config": asdict(config),
        "git_describe": _git_describe(),
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    _write_rows(rows, header, out, fmt, manifest)
    if config.estimator == "both" and mismatch > 1e-8 * max(1.0, float(np.abs(ests).max())):
        print(f"dense and fast estimators disagree by {mismatch:.3e}", file=sys.stderr)
        return 1
    return 0


def _parse_int_list(text):
    if isinstance(text, list):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).split(",") if tok]


def cmd_variance_sweep(ns, etas, ks, samples: int = 0, seed: int = 0,
                       out: str = None, fmt: str = "csv") -> int:
    """Exact variance table over an (n, eta, k) grid, optional empirical column."""
    header = ["n", "eta", "k", "q_exact", "avg_shadow_norm_sq", "variance_bound",
              "empirical_avg_variance", "samples"]
    rows = []
    for n in ns:
        for eta in etas:
            for k in ks:
                if not 1 <= k <= eta <= n:
                    continue
                emp = ""
                if samples > 0:
                    state = random_state(n, eta, _state_rng(seed + len(rows)))
                    us, zs = collect_shadow_arrays(state, samples, seed + len(rows))
                    ests = batch_estimate_matrices(us, zs, eta, k)
                    mean = ests.mean(axis=0)
                    var = (np.abs(ests - mean) ** 2).mean(axis=0)
                    emp = _fmt(float(var.mean()))
                rows.append([
                    n, eta, k,
                    str(q_value(n, eta, k)),
                    str(avg_shadow_norm_sq(n, eta, k)),
                    str(variance_bound(n, eta, k)),
                    emp,
                    samples if samples > 0 else "",
                ])
    manifest = {
        "command": "variance-sweep",
        "grid": {"n": list(ns), "eta": list(etas), "k": list(ks)},
        "samples": samples,
        "seed": seed,
        "git_describe": _git_describe(),
    }
    _write_rows(rows, header, out, fmt, manifest)
    return 0


def run_validation(level: str = "quick", seed: int = 2024,
                   corrupt_estimation: bool = False) -> dict:
    """Run the invariant suites and return a JSON-able report.

    corrupt_estimation deliberately perturbs the estimation operator before
    the per-shadow checks; it exists as a negative control so the tests can
    confirm the suite actually detects a wrong operator.
    """
    from . import channel, identities, shadows

    quick = level == "quick"
    n_cap = 5 if quick else 8
    mc_samples = 10_000 if quick else 100_000
    rng = np.random.default_rng(seed)
    report = {"level": level, "checks": []}

    def record(name, passed, detail=""):
        report["checks"].append({"name": name, "passed": bool(passed), "detail": detail})

    # exact reference-ket expansion and channel eigenrelation
    ok = True
    for n in range(1, n_cap + 1):
        for eta in range(n + 1):
            spec = channel.ChannelSpec(n, eta)
            acc = [Fraction(0)] * binom(n, eta)
            for d in range(min(eta, n - eta) + 1):
                nd = channel.symmetrized_difference(n, eta, d)
                w = channel.a_coeff(n, eta, d)
                acc = [a + w * v for a, v in zip(acc, nd.values)]
                img = channel.apply_channel_diagonal(spec, nd)
                lam = channel.eigenvalue(n, d)
                ok &= all(v == lam * u for v, u in zip(img.values, nd.values))
            ok &= acc[0] == 1 and all(a == 0 for a in acc[1:])
    record("projector_expansion_and_eigenrelation", ok, f"exact, n <= {n_cap}")

    # closed-form sums vs brute force
    ok = True
    for n in range(1, n_cap + 1):
        for eta in range(n + 1):
            for d in range(min(eta, n - eta) + 1):
                ok &= identities.trace_nd_squared(n, eta, d).agree
            for k in range(1, eta + 1):
                for s in range(min(k, n - eta) + 1):
                    ok &= identities.t_sum(n, eta, k, s).agree
    ok &= identities.chu_vandermonde_checks(10)
    record("closed_form_sums", ok, f"exact, n <= {n_cap}")

    # per-shadow squared-norm identity, with optional corruption hook
    ok = True
    detail = []
    for n, eta in [(4, 2), (n_cap, min(3, n_cap - 1))]:
        state = random_state(n, eta, rng)
        us, zs = collect_shadow_arrays(state, 32, seed + n)
        for k in range(1, eta + 1):
            want = float(trace_e_squared(n, eta, k))
            emat = estimation_matrix(n, eta, k)
            values = list(emat.class_values)
            if corrupt_estimation:
                values[0] = values[0] + 1
            diag = np.array(
                [float(values[t]) for t in channel.overlap_class_array(n, k, eta)]
            )
            from .shadows import _effective_rotation
            from .linalg import compound_batch

            for i in range(us.shape[0]):
                sh = ClassicalShadow(us[i], tuple(int(m) for m in zs[i]), seed, i)
                b = compound_batch(
                    _effective_rotation(sh.u, sh.z)[None, :, :], k
                )[0]
                est = b.conj().T @ (diag[:, None] * b)
                got = float(np.sum(np.abs(est) ** 2))
                if abs(got - want) > 1e-8 * want:
                    ok = False
                    detail.append(f"n={n} eta={eta} k={k}: {got} != {want}")
                    break
    record("per_shadow_norm_sum", ok, "; ".join(detail) or "within 1e-8 relative")

    # fast path vs dense path
    ok = True
    from .shadows import estimate_rdm, sample_shadow

    worst = 0.0
    for n, eta in [(4, 2), (min(6, n_cap), 3)]:
        if eta > n:
            continue
        state = random_state(n, eta, rng)
        for t in range(4 if quick else 10):
            sh = sample_shadow(state, seed + 17 + t, t)
            for k in range(1, eta + 1):
                ss = list(subsets(n, k))
                for _ in range(4):
                    p = ss[rng.integers(len(ss))]
                    q = ss[rng.integers(len(ss))]
                    d = estimate_rdm(sh, eta, k, p, q)
                    f = fast_estimate_rdm(sh, eta, k, p, q)
                    worst = max(worst, abs(d - f) / max(1.0, abs(d)))
    ok = worst < 1e-8
    record("fast_vs_dense", ok, f"worst relative gap {worst:.2e}")

    # Monte Carlo twirl against the exact channel
    ok = True
    detail = []
    for n, eta in [(3, 1), (4, 2)]:
        spec = channel.ChannelSpec(n, eta)
        p = tuple(range(1, eta + 1))
        op = channel.DiagonalOperator(
            n, eta, [1 if z == p else 0 for z in subsets(n, eta)]
        )
        exact = channel.apply_channel_diagonal(spec, op).as_array()
        mean, err = channel.mc_channel_estimate(spec, p, mc_samples, seed + n)
        dev = np.max(np.abs(mean - exact) / np.maximum(err, 1e-12))
        if dev > 5.0:
            ok = False
            detail.append(f"n={n} eta={eta}: {dev:.1f} sigma")
    record("mc_channel_twirl", ok, "; ".join(detail) or f"{mc_samples} samples, within 5 sigma")

    report["passed"] = all(c["passed"] for c in report["checks"])
    return report


def cmd_validate(level: str = "quick", out: str = None, seed: int = 2024) -> int:
    """Run the validation suites; exit 1 if any check fails."""
    if level not in ("quick", "full"):
        raise ConfigError(f"level must be quick or full, got {level!r}")
    report = run_validation(level, seed=seed)
    text = json.dumps(report, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        print(f"wrote {out}: {'pass' if report['passed'] else 'FAIL'}")
    else:
        sys.stdout.write(text)
    return 0 if report["passed"] else 1


def cmd_slater_overlap(config: ExperimentConfig, out: str = None, fmt: str = "csv",
                       rotation: np.ndarray = None) -> int:
    """Estimate every Slater-determinant overlap of the configured state.

    Doubles the register by eta reference modes, samples shadows of the
    half-and-half superposition, and reads each overlap as twice the
    estimated transition from the reference determinant.  An optional mode
    rotation is applied to the state first, so the reported rows are then
    overlaps with the rotated determinants.
    """
    config.validate()
    t0 = time.monotonic()
    state = build_state(config)
    if rotation is not None:
        state = apply_rotation(state, np.asarray(rotation, dtype=complex).conj().T)
    n, eta = config.n, config.eta
    big = slater_superposition(state)
    ref = tuple(range(n + 1, n + eta + 1))
    ref_rank = rank_subset(ref)

    us, zs = collect_shadow_arrays(big, config.samples, config.seed)
    ests = batch_estimate_matrices(us, zs, eta, eta)

    if isinstance(config.targets, list):
        qs = [validate_subset(tuple(int(m) for m in q), n) for q in config.targets]
    else:
        qs = list(subsets(n, eta))

    header = ["q", "overlap_re", "overlap_im", "stderr_re", "stderr_im",
              "oracle_re", "oracle_im", "overlap_var_single_shot"]
    rows = []
    for q in qs:
        vals = 2.0 * ests[:, ref_rank, rank_subset(q)]
        val, err = _aggregate_columns(vals, config.aggregation)
        oracle = complex(state.amplitude(q))
        var1 = float(np.mean(np.abs(vals - vals.mean()) ** 2))
        rows.append([
            _subset_str(q),
            _fmt(val.real), _fmt(val.imag), _fmt(err.real), _fmt(err.imag),
            _fmt(oracle.real), _fmt(oracle.imag), _fmt(var1),
        ])
    manifest = {
        "command": "slater-overlap",
        "config": asdict(config),
        "git_describe": _git_describe(),
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    _write_rows(rows, header, out, fmt, manifest)
    return 0


def _load_config(args, need_k: bool = True) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in ("n", "eta", "k", "samples", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    data.setdefault("k", data.get("eta") if not need_k else None)
    missing = [key for key in ("n", "eta", "k", "samples", "seed") if data.get(key) is None]
    if missing:
        raise ConfigError(f"missing config fields: {', '.join(missing)}")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(extra))}")
    config = ExperimentConfig(**data)
    config.validate()
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fermishadow",
        description="Randomized occupation measurements for fixed-particle-number states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_k=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--n", type=int)
        p.add_argument("--eta", type=int)
        if with_k:
            p.add_argument("--k", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output base path (file mode); stdout otherwise")
        p.add_argument("--format", choices=["csv", "json"], default="csv")

    pe = sub.add_parser("estimate", help="estimate k-body transitions from shadows")
    common(pe)

    pv = sub.add_parser("variance-sweep", help="exact variance table over a size grid")
    pv.add_argument("--n", required=True, help="comma-separated mode counts")
    pv.add_argument("--eta", required=True, help="comma-separated particle numbers")
    pv.add_argument("--k", required=True, help="comma-separated orders")
    pv.add_argument("--samples", type=int, default=0, help="empirical column sample count")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--out")
    pv.add_argument("--format", choices=["csv", "json"], default="csv")

    pc = sub.add_parser("validate", help="run the invariant suites")
    pc.add_argument("--level", choices=["quick", "full"], default="quick")
    pc.add_argument("--seed", type=int, default=2024)
    pc.add_argument("--out")

    ps = sub.add_parser("slater-overlap", help="estimate all Slater overlaps of a state")
    common(ps, with_k=False)

    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            config = _load_config(args)
            return cmd_estimate(config, args.out, args.format)
        if args.command == "variance-sweep":
            return cmd_variance_sweep(
                _parse_int_list(args.n), _parse_int_list(args.eta), _parse_int_list(args.k),
                args.samples, args.seed, args.out, args.format,
            )
        if args.command == "validate":
            return cmd_validate(args.level, args.out, args.seed)
        config = _load_config(args, need_k=False)
        return cmd_slater_overlap(config, args.out, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
