"""Kernel benchmark: JIT path vs pure-NumPy fallback, plus the end-to-end
template generation time.

Run ``python -m colorvein.bench``.  The fallback timings come from a
subprocess with COLORVEIN_DISABLE_NUMBA=1 so both paths are measured in a
clean interpreter; results land in bench.json (or stdout).
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench_colorize(repeats: int) -> float:
    from .colorize import build_lightness, colorize, background_lightness_for
    from .extraction import segment
    from .hints import derive_hints
    from .corpus import token_for
    from .synth import generate_subject

    subj = generate_subject(21, 1, (64, 64))
    mask = segment(subj.samples[0])
    token = token_for(0, "bench", "main")
    hset = derive_hints(token, mask, 10)
    light = build_lightness(
        mask, (hset.region_lightness,
               background_lightness_for(hset.region_lightness)))
    colorize(light, hset, mask=mask)  # warm-up / JIT compile
    start = time.perf_counter()
    for _ in range(repeats):
        colorize(light, hset, mask=mask)
    return (time.perf_counter() - start) / repeats


def _bench_rlt(repeats: int) -> float:
    from .extraction import default_methods, extract_pattern
    from .synth import generate_subject

    subj = generate_subject(21, 1, (64, 64))
    method = default_methods()[2]
    extract_pattern(subj.samples[0], method)  # warm-up
    start = time.perf_counter()
    for _ in range(repeats):
        extract_pattern(subj.samples[0], method)
    return (time.perf_counter() - start) / repeats


def _bench_mc(repeats: int) -> float:
    from .extraction import default_methods, extract_pattern
    from .synth import generate_subject

    subj = generate_subject(21, 1, (64, 64))
    method = default_methods()[0]
    extract_pattern(subj.samples[0], method)
    start = time.perf_counter()
    for _ in range(repeats):
        extract_pattern(subj.samples[0], method)
    return (time.perf_counter() - start) / repeats


def _bench_template(repeats: int) -> float:
    """Full protected-template generation (the deployment-cost figure)."""
    from .corpus import token_for
    from .embedding import Architecture, EmbeddingModel, embed
    from .pipeline import PipelineParams, protect_image
    from .synth import generate_subject

    subj = generate_subject(21, 1, (64, 64))
    token = token_for(0, "bench", "main")
    model = EmbeddingModel(Architecture(input_hw=(64, 64)), seed=0)
    params = PipelineParams(m=10)
    embed(protect_image(subj.samples[0], token, params), model)  # warm-up
    start = time.perf_counter()
    for _ in range(repeats):
        embed(protect_image(subj.samples[0], token, params), model)
    return (time.perf_counter() - start) / repeats


def run_suite(repeats: int) -> dict:
    from ._accel import NUMBA_ENABLED

    return {
        "numba_enabled": NUMBA_ENABLED,
        "repeats": repeats,
        "seconds": {
            "propagation_solve_64x64": _bench_colorize(repeats),
            "rlt_extract_64x64": _bench_rlt(repeats),
            "mc_extract_64x64": _bench_mc(repeats),
            "template_generation_64x64": _bench_template(max(1, repeats // 2)),
        },
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m colorvein.bench")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--out", default="bench.json")
    parser.add_argument("--single-path", action="store_true",
                        help="run only the current path and print JSON")
    args = parser.parse_args(argv)

    if args.single_path:
        print(json.dumps(run_suite(args.repeats)))
        return 0

    jit = run_suite(args.repeats)
    env = dict(os.environ, COLORVEIN_DISABLE_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, "-m", "colorvein.bench", "--single-path",
         "--repeats", str(max(1, args.repeats // 5 or 1))],
        env=env, capture_output=True, text=True,
    )
    if proc.returncode != 0:
        print(proc.stderr, file=sys.stderr)
        return 1
    fallback = json.loads(proc.stdout)
    speedup = {
        name: fallback["seconds"][name] / jit["seconds"][name]
        for name in jit["seconds"]
    }
    result = {"jit": jit, "fallback": fallback, "speedup": speedup}
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in sorted(speedup):
        print(f"{name}: jit {jit['seconds'][name]*1e3:.2f} ms | "
              f"fallback {fallback['seconds'][name]*1e3:.2f} ms | "
              f"speedup {speedup[name]:.1f}x")
    print(f"written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
