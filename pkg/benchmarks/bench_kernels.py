"""Compiled versus pure-Python kernels.

Times each hot kernel through both implementations in one process, then
one full training step (forward, naive loss, backward, Yogi update) of the
default d_in=10, K=4 network in two subprocesses, one of them with
PLLAB_PURE_PYTHON=1. Run with ``python3 benchmarks/bench_kernels.py``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pllab import _kernels
from pllab._kernels import lz_py, nn_py
from pllab.nn import ModelSpec, init_model
from pllab.theory import params_to_symbol_bytes

STEP_SNIPPET = """
import timeit
import numpy as np
from pllab import _kernels, losses
from pllab.nn import ModelSpec, Workspace, backward, forward, init_model
from pllab.optim import init_yogi, yogi_step

rng = np.random.default_rng(0)
params = init_model(ModelSpec(input_dim=10, output_dim=4), 0)
state = init_yogi(params)
x = rng.normal(size=(128, 10))
masks = rng.random((128, 4)) < 0.4
masks[np.arange(128), rng.integers(0, 4, 128)] = True
ws = Workspace()

def step():
    _, probs, cache = forward(params, x, workspace=ws)
    _, dlogits = losses.naive_loss(probs, masks)
    yogi_step(state, params, backward(cache, dlogits).tensors())

step()
best = min(timeit.repeat(step, number={number}, repeat={repeat})) / {number}
print(_kernels.BACKEND, best)
"""


def best_of(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_lz(repeat):
    params = init_model(ModelSpec(input_dim=10, output_dim=4), 0)
    data = params_to_symbol_bytes(params, bits=8)
    compiled = _kernels._lz.lz76_phrase_count
    assert compiled(data) == lz_py.lz76_phrase_count(data)
    return (f"lz76 on {len(data)} bytes",
            best_of(lambda: lz_py.lz76_phrase_count(data), 1, repeat),
            best_of(lambda: compiled(data), 3, repeat))


def bench_bn_elu(repeat):
    rng = np.random.default_rng(0)
    B, H = 128, 512
    z = rng.normal(size=(B, H))
    scale, shift = rng.normal(1, 0.1, H), rng.normal(0, 0.1, H)
    bufs = dict(h_out=np.empty((B, H)), xhat_out=np.empty((B, H)), mean_out=np.empty(H),
                var_out=np.empty(H), inv_std_out=np.empty(H), scratch=np.empty((B, H)))
    dh = rng.normal(size=(B, H))
    dz, ds, dt = np.empty((B, H)), np.empty(H), np.empty(H)
    out = []
    for impl in (nn_py, _kernels._nn):
        def run():
            impl.bn_elu_train(z, scale, shift, 1e-5, 1.0, **bufs)
            impl.bn_elu_backward(dh, bufs["h_out"], bufs["xhat_out"], scale, bufs["inv_std_out"], 1.0,
                                 dz, ds, dt)
        out.append(best_of(run, 20, repeat))
    return (f"batch norm + ELU forward/backward ({B}x{H})", *out)


def bench_yogi(repeat):
    rng = np.random.default_rng(0)
    n = 139524
    p, g = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    out = []
    for impl in (nn_py, _kernels._nn):
        out.append(best_of(lambda: impl.yogi_update(p, g, m, v, 1e-3, 0.9, 0.999, 0.1, 0.001, 1e-3),
                           20, repeat))
    return (f"yogi update ({n} params)", *out)


def bench_step(repeat):
    times = {}
    for pure in ("1", "0"):
        env = dict(os.environ, PLLAB_PURE_PYTHON=pure)
        code = STEP_SNIPPET.format(number=20, repeat=repeat)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                             check=True)
        backend, t = res.stdout.split()
        times[backend] = float(t)
    return ("full training step (B=128, 139524 params)", times["python"], times.get("cython", float("nan")))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.BACKEND != "cython":
        sys.exit("compiled kernels are not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':48s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for bench in (bench_lz, bench_bn_elu, bench_yogi, bench_step):
        name, py, cy = bench(args.repeat)
        print(f"{name:48s} {py * 1e3:10.3f} {cy * 1e3:10.3f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
