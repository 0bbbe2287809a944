"""Benchmark the assignment-DP kernels: compiled extension vs pure Python.

Builds synthetic meetings of increasing size, solves each with both
backends, verifies they return identical results, and reports wall times.

Run from the repository root:

    python benchmarks/bench_dp.py
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from uttdiar.assignment import cost_matrix_from_timeline, dp_backend, solve_dp
from uttdiar.scores import ScoreMatrix
from uttdiar.simulate import SimConfig, simulate_timeline
from uttdiar.timeline import build_overlap_graph

CASES = [
    ("sparse-small", SimConfig(num_speakers=(3, 3), beta=2.0,
                               utterance_duration=(0.5, 1.5), target_frames=23_000,
                               max_concurrency_cap=3, seed=8), 3),
    ("sparse-large", SimConfig(num_speakers=(3, 3), beta=2.0,
                               utterance_duration=(0.5, 1.5), target_frames=115_000,
                               max_concurrency_cap=3, seed=8), 3),
    ("dense", SimConfig(num_speakers=(4, 4), beta=1.0,
                        utterance_duration=(1.0, 3.0), target_frames=80_000,
                        max_concurrency_cap=4, seed=8), 4),
]

REPEATS = 5


def best_time(graph, cost, timeline, channels, backend):
    best = float("inf")
    result = None
    for _ in range(REPEATS):
        started = time.perf_counter()
        result = solve_dp(graph, cost, timeline, channels, backend=backend)
        best = min(best, time.perf_counter() - started)
    return best, result


def main():
    backends = ["python"]
    if dp_backend() == "compiled":
        backends.insert(0, "compiled")
    else:
        print("note: compiled extension not built; benchmarking python only")

    header = f"{'case':<14} {'utts':>6} {'C':>2} " + "".join(
        f"{b + ' (s)':>14}" for b in backends
    ) + ("{:>10}".format("speedup") if len(backends) == 2 else "")
    print(header)
    print("-" * len(header))

    for name, config, channels in CASES:
        timeline = simulate_timeline(config)
        rng = np.random.default_rng(99)
        scores = ScoreMatrix(
            rng.uniform(0.02, 0.98, (timeline.total_frames, channels)), "vad")
        cost = cost_matrix_from_timeline(timeline, scores)
        graph = build_overlap_graph(timeline)

        times = {}
        results = {}
        for backend in backends:
            times[backend], results[backend] = best_time(
                graph, cost, timeline, channels, backend)
        if len(backends) == 2:
            a, b = results["compiled"], results["python"]
            assert a.loss == b.loss and a.assignment == b.assignment, \
                "backends disagree"
        row = f"{name:<14} {timeline.num_utterances:>6} {channels:>2} " + \
            "".join(f"{times[b]:>14.4f}" for b in backends)
        if len(backends) == 2:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
