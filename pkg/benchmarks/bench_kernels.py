"""Compare the compiled and pure-numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--train-steps 20]

Part one times each kernel pair in-process and checks the two paths agree.
Part two times whole GPT training steps in child processes with
DISTILL_AUDIT_NUMBA=1 and =0, since the path is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from distill_audit.numcore import kernels
from distill_audit.numcore.rng import LANES, _blocks_numba, _blocks_numpy, _seed_lanes


def _inputs(rng):
    f = np.float32
    x = rng.standard_normal((4096, 128)).astype(f)
    scores = rng.standard_normal((64, 64, 64)).astype(f)
    probs = kernels._causal_softmax_numpy(scores)
    grad3 = rng.standard_normal(probs.shape).astype(f)
    w = rng.standard_normal(128).astype(f)
    b = rng.standard_normal(128).astype(f)
    _, xhat, rstd = kernels._layer_norm_numpy(x, w, b, 1e-5)
    idx = rng.integers(0, 65, 8192)
    g = rng.standard_normal((8192, 128)).astype(f)
    p = rng.standard_normal(200_000).astype(f)
    return {
        "softmax_rows": lambda: (x,),
        "causal_softmax": lambda: (scores,),
        "softmax_backward": lambda: (probs, grad3),
        "layer_norm": lambda: (x, w, b, 1e-5),
        "layer_norm_backward": lambda: (x, xhat, rstd, w),
        "scatter_rows": lambda: (idx, g, 65),
        "adam_update": lambda: (p.copy(), p, np.zeros_like(p), np.zeros_like(p),
                                1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
    }


def _time(fn, args_fn, repeat):
    fn(*args_fn())                      # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        args = args_fn()
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    inputs = _inputs(rng)
    print(f"{'kernel':22s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  max|diff|")
    for name, (fast, ref) in kernels.PAIRS.items():
        make = inputs[name]
        a, b = fast(*make()), ref(*make())
        if name == "adam_update":
            pa, pb = make(), make()
            fast(*pa)
            ref(*pb)
            a, b = pa[0], pb[0]
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        diff = max(float(np.max(np.abs(np.asarray(u, np.float64) - np.asarray(v, np.float64))))
                   for u, v in zip(a, b))
        tf, tr = _time(fast, make, repeat), _time(ref, make, repeat)
        print(f"{name:22s} {tf * 1e3:10.3f} {tr * 1e3:10.3f} {tr / tf:8.2f}  {diff:.2e}")
    n_blocks = 4096
    tf = _time(_blocks_numba, lambda: (_seed_lanes(1), n_blocks), repeat)
    tr = _time(_blocks_numpy, lambda: (_seed_lanes(1), n_blocks), repeat)
    same = np.array_equal(_blocks_numba(_seed_lanes(1), 8), _blocks_numpy(_seed_lanes(1), 8))
    print(f"{'rng blocks':22s} {tf * 1e3:10.3f} {tr * 1e3:10.3f} {tr / tf:8.2f}  "
          f"{'identical' if same else 'DIFFERENT'} ({n_blocks * LANES} words)")


_STEP_SCRIPT = """
import time
from distill_audit.distill import Condition, TokenTask, train_student
from distill_audit.models import gpt_preset, init_model
import numpy as np
tokens = np.random.default_rng(0).integers(0, 65, 50_000)
task = TokenTask(tokens[:45_000], tokens[45_000:], 64, eval_blocks=4)
init = init_model(gpt_preset("tiny", 65), 0)
train_student(Condition("SIDDO"), None, init, task, 2, batch_size=32)
t = time.perf_counter()
train_student(Condition("SIDDO"), None, init, task, {steps}, batch_size=32)
print((time.perf_counter() - t) / {steps})
"""


def bench_training(steps):
    print(f"\ntiny GPT training step (batch 32, block 64), {steps} steps per path")
    for flag in ("1", "0"):
        env = dict(os.environ, DISTILL_AUDIT_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _STEP_SCRIPT.format(steps=steps)], env=env,
                             capture_output=True, text=True, check=True)
        label = "numba" if flag == "1" else "numpy"
        print(f"  {label}: {float(out.stdout.strip()) * 1e3:.1f} ms/step")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--train-steps", type=int, default=20)
    args = parser.parse_args()
    bench_kernels(args.repeat)
    if args.train_steps > 0:
        bench_training(args.train_steps)


if __name__ == "__main__":
    main()
