"""Command-line harness: instance generation, verification, benchmarks.

Commands
    gen     write Q.csv / K.csv / V.csv and the weight manifest for a seed
    verify  run the fast path against the exact oracle, report JSON, exit 0/1
    bench   time the fast path over an n-sweep, one JSON line per n
    linear  run the FFT linear-attention path against its dense oracle

Instances are drawn with numpy's default PCG64 generator from --seed, in
this order: Q, then K, then V, each row-major uniform on [-B, B]; in
random-support mode the support indices follow (a no-replacement draw from
[d] x [d]), then one uniform [-1, 1] generator vector per support entry.
Reports echo the algorithm identifier so other implementations can match
instances by seed or by consuming the CSV files.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .engine import (
    exact_attention,
    fast_attention,
    linear_attention,
    linear_attention_oracle,
    linf_error,
)
from .errors import ApproximationError, NormalizationError, ResourceLimitError
from .matrixio import MANIFEST_NAME, load_matrix, load_weights, save_matrix, save_weights
from .structured import DENSE_LIMIT, ToeplitzGenerator
from .weights import (
    AttentionInstance,
    DEFAULT_ROTARY_BASE,
    SupportSet,
    WeightSequence,
    rope_weights,
)

RNG_ALGORITHM = "numpy-pcg64"


@dataclass
class RunConfig:
    n: int
    d: int
    B: float
    eps: float
    alpha: float
    seed: int
    mode: str
    support_size: int | None
    threads: int | None
    dense_limit: int


def make_weights(cfg: RunConfig, rng: np.random.Generator) -> WeightSequence:
    if cfg.mode == "rope":
        return rope_weights(cfg.n, cfg.d, cfg.alpha)
    size = cfg.support_size if cfg.support_size is not None else 2 * cfg.d
    if size > cfg.d * cfg.d:
        raise ValueError(f"support size {size} exceeds d^2 = {cfg.d * cfg.d}")
    flat = rng.choice(cfg.d * cfg.d, size=size, replace=False)
    entries = tuple((int(f) // cfg.d + 1, int(f) % cfg.d + 1) for f in flat)
    gens = tuple(
        ToeplitzGenerator(cfg.n, rng.uniform(-1.0, 1.0, 2 * cfg.n - 1))
        for _ in entries
    )
    return WeightSequence(cfg.n, cfg.d, SupportSet(entries), gens)


def make_instance(cfg: RunConfig) -> AttentionInstance:
    rng = np.random.default_rng(cfg.seed)
    Q = rng.uniform(-cfg.B, cfg.B, (cfg.n, cfg.d))
    K = rng.uniform(-cfg.B, cfg.B, (cfg.n, cfg.d))
    V = rng.uniform(-cfg.B, cfg.B, (cfg.n, cfg.d))
    weights = make_weights(cfg, rng)
    return AttentionInstance(Q, K, V, weights, cfg.B, cfg.eps)


def load_instance(directory, cfg: RunConfig) -> AttentionInstance:
    directory = Path(directory)
    Q = load_matrix(directory / "Q.csv")
    K = load_matrix(directory / "K.csv")
    V = load_matrix(directory / "V.csv")
    weights = load_weights(directory / MANIFEST_NAME)
    return AttentionInstance(Q, K, V, weights, cfg.B, cfg.eps)


def _config_echo(cfg: RunConfig, **extra) -> dict:
    out = asdict(cfg)
    out.update(extra)
    return out


def _emit(obj: dict):
    print(json.dumps(obj))


def cmd_gen(cfg: RunConfig, out_dir) -> int:
    inst = make_instance(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "Q.csv", inst.Q)
    save_matrix(out / "K.csv", inst.K)
    save_matrix(out / "V.csv", inst.V)
    save_weights(out, inst.weights)
    files = sorted(p.name for p in out.iterdir() if p.suffix in (".csv", ".json"))
    _emit(
        {
            "command": "gen",
            "config": _config_echo(cfg),
            "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.seed},
            "out_dir": str(out),
            "files": files,
        }
    )
    return 0


def cmd_verify(cfg: RunConfig, from_dir=None) -> int:
    source = "files" if from_dir else "seed"
    inst = load_instance(from_dir, cfg) if from_dir else make_instance(cfg)

    t0 = time.perf_counter()
    fast = fast_attention(inst, threads=cfg.threads)
    fast_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    oracle = exact_attention(inst, dense_limit=cfg.dense_limit)
    oracle_time = time.perf_counter() - t0

    err = linf_error(fast.T, oracle.T)
    ok = err <= cfg.eps
    _emit(
        {
            "command": "verify",
            "config": _config_echo(cfg, source=source),
            "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.seed},
            "linf_error": err,
            "fast_time": fast_time,
            "oracle_time": oracle_time,
            "monomial_count": fast.stats["monomial_count"],
            "poly_degree": fast.stats["poly_degree"],
            "exponent_bound": fast.stats["exponent_bound"],
            "pass": ok,
        }
    )
    return 0 if ok else 1


def cmd_linear(cfg: RunConfig, from_dir=None) -> int:
    source = "files" if from_dir else "seed"
    inst = load_instance(from_dir, cfg) if from_dir else make_instance(cfg)

    t0 = time.perf_counter()
    fast = linear_attention(inst)
    fast_time = time.perf_counter() - t0
    t0 = time.perf_counter()
    oracle = linear_attention_oracle(inst, dense_limit=cfg.dense_limit)
    oracle_time = time.perf_counter() - t0

    err = linf_error(fast.T, oracle.T)
    ok = err <= cfg.eps
    _emit(
        {
            "command": "linear",
            "config": _config_echo(cfg, source=source),
            "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.seed},
            "linf_error": err,
            "fast_time": fast_time,
            "oracle_time": oracle_time,
            "support_size": fast.stats["support_size"],
            "pass": ok,
        }
    )
    return 0 if ok else 1


def cmd_bench(cfg: RunConfig, sweep, repeats: int) -> int:
    prev_fast = None
    prev_oracle = None
    for n in sweep:
        run_cfg = RunConfig(**{**asdict(cfg), "n": n})
        inst = make_instance(run_cfg)

        fast_times = []
        stats = {}
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = fast_attention(inst, threads=cfg.threads)
            fast_times.append(time.perf_counter() - t0)
            stats = out.stats
        fast_time = statistics.median(fast_times)

        oracle_times = None
        oracle_time = None
        if n <= cfg.dense_limit:
            oracle_times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                exact_attention(inst, dense_limit=cfg.dense_limit)
                oracle_times.append(time.perf_counter() - t0)
            oracle_time = statistics.median(oracle_times)

        _emit(
            {
                "command": "bench",
                "config": _config_echo(run_cfg),
                "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg.seed},
                "n": n,
                "repeats": repeats,
                "fast_time": fast_time,
                "fast_times": fast_times,
                "oracle_time": oracle_time,
                "oracle_times": oracle_times,
                "fast_ratio": None if prev_fast is None else fast_time / prev_fast,
                "oracle_ratio": None
                if (prev_oracle is None or oracle_time is None)
                else oracle_time / prev_oracle,
                "monomial_count": stats.get("monomial_count"),
                "poly_degree": stats.get("poly_degree"),
                "exponent_bound": stats.get("exponent_bound"),
            }
        )
        prev_fast = fast_time
        prev_oracle = oracle_time
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ropeattn",
        description="Fast rotary-weighted attention: generate, verify, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "write a seeded instance to CSV files"),
        ("verify", "fast path vs exact oracle, JSON report, exit 0/1"),
        ("bench", "time the fast path over an n-sweep, JSON lines"),
        ("linear", "linear-attention path vs its dense oracle"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=str, default="64",
                       help="sequence length; bench accepts a comma-separated sweep")
        p.add_argument("--d", type=int, default=4)
        p.add_argument("--B", type=float, default=0.5, help="entry magnitude bound")
        p.add_argument("--eps", type=float, default=1e-6, help="output accuracy target")
        p.add_argument("--alpha", type=float, default=DEFAULT_ROTARY_BASE,
                       help="rotary angle base")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("rope", "random-support"), default="rope")
        p.add_argument("--support-size", type=int, default=None,
                       help="support size in random-support mode (default 2*d)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--dense-limit", type=int, default=DENSE_LIMIT)
        if name == "gen":
            p.add_argument("--out-dir", type=str, default=".")
        if name in ("verify", "linear"):
            p.add_argument("--from-dir", type=str, default=None,
                           help="load Q/K/V/manifest from this directory instead of --seed")
        if name == "bench":
            p.add_argument("--repeats", type=int, default=1,
                           help="timings per n; the median is reported")
    return parser


def _parse_sizes(text: str):
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"--n expects integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"--n expects positive integers, got {text!r}")
    return sizes


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sizes = _parse_sizes(args.n)
        if args.command != "bench" and len(sizes) != 1:
            raise ValueError(f"{args.command} takes a single --n, got {sizes}")
        if args.command != "gen" and not args.B > 0:
            raise ValueError(f"B must be positive, got {args.B}")
        if args.B < 0:
            raise ValueError(f"B must be nonnegative, got {args.B}")
        if args.command != "gen" and not 0 < args.eps < 0.1:
            raise ValueError(f"eps must lie in (0, 0.1), got {args.eps}")
        cfg = RunConfig(
            n=sizes[0],
            d=args.d,
            B=args.B,
            eps=args.eps,
            alpha=args.alpha,
            seed=args.seed,
            mode=args.mode,
            support_size=args.support_size,
            threads=args.threads,
            dense_limit=args.dense_limit,
        )
        if args.command == "gen":
            return cmd_gen(cfg, args.out_dir)
        if args.command == "verify":
            return cmd_verify(cfg, args.from_dir)
        if args.command == "linear":
            return cmd_linear(cfg, args.from_dir)
        return cmd_bench(cfg, sizes, args.repeats)
    except (
        ValueError,
        ResourceLimitError,
        ApproximationError,
        NormalizationError,
        OSError,
    ) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}})
        return 1


if __name__ == "__main__":
    sys.exit(main())
