"""Compare the compiled DP kernels against the pure-numpy fallback.

Times forward-backward and Viterbi over random 9-tag sequences, plus one
end-to-end CRF training run per backend.

    python3 benchmarks/bench_kernels.py [--sequences 2000] [--length 9]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dsqa._kernels import available_backends


def time_kernels(backend, sequences: int, length: int, tags: int = 9) -> dict:
    rng = np.random.default_rng(0)
    emis = rng.normal(size=(sequences, length, tags))
    trans = rng.normal(size=(tags, tags))
    start = rng.normal(size=tags)
    end = rng.normal(size=tags)

    t0 = time.perf_counter()
    acc = 0.0
    for i in range(sequences):
        log_z, unary, pairwise = backend.forward_backward(
            emis[i], trans, start, end
        )
        acc += log_z
    fb = time.perf_counter() - t0

    t0 = time.perf_counter()
    for i in range(sequences):
        path, score = backend.viterbi_path(emis[i], trans, start, end)
        acc += score
    vit = time.perf_counter() - t0
    return {"forward_backward_s": fb, "viterbi_s": vit, "checksum": acc}


def time_training(backend_name: str, corpus_size: int = 300) -> float:
    # re-selecting the backend in a fresh interpreter would be cleaner;
    # here we patch the dispatch table directly for an in-process run
    import dsqa._kernels as kernels
    from dsqa import ner
    from dsqa.synth import SynthConfig, generate_synthetic_corpus

    backend = available_backends()[backend_name]
    saved = (kernels.forward_backward, kernels.viterbi_path, kernels.log_partition)
    kernels.forward_backward = backend.forward_backward
    kernels.viterbi_path = backend.viterbi_path
    kernels.log_partition = backend.log_partition
    try:
        corpus = generate_synthetic_corpus(SynthConfig(size=corpus_size), seed=0)
        t0 = time.perf_counter()
        ner.train_crf(corpus, ner.CrfTrainConfig(seed=0, max_iterations=20))
        return time.perf_counter() - t0
    finally:
        kernels.forward_backward, kernels.viterbi_path, kernels.log_partition = saved


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sequences", type=int, default=2000)
    parser.add_argument("--length", type=int, default=9)
    parser.add_argument("--train-size", type=int, default=300)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(sorted(backends))}")
    print(f"{args.sequences} sequences of length {args.length}, 9 tags\n")

    results = {}
    for name in sorted(backends):
        results[name] = time_kernels(backends[name], args.sequences, args.length)
        train_s = time_training(name, args.train_size)
        results[name]["train_s"] = train_s

    header = f"{'backend':<10}{'fwd-bwd':>12}{'viterbi':>12}{'crf train':>12}"
    print(header)
    print("-" * len(header))
    for name in sorted(results):
        r = results[name]
        print(
            f"{name:<10}{r['forward_backward_s']:>11.3f}s"
            f"{r['viterbi_s']:>11.3f}s{r['train_s']:>11.3f}s"
        )
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(
            f"\nspeedup (python/cython): "
            f"fwd-bwd {py['forward_backward_s'] / cy['forward_backward_s']:.1f}x, "
            f"viterbi {py['viterbi_s'] / cy['viterbi_s']:.1f}x, "
            f"train {py['train_s'] / cy['train_s']:.1f}x"
        )
        checks = abs(py["checksum"] - cy["checksum"])
        print(f"checksum agreement: |delta| = {checks:.2e}")


if __name__ == "__main__":
    main()
