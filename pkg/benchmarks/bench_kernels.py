"""Compiled vs numpy kernels, alone and inside the operators that call them.

Kernel timings call both implementations directly. End-to-end timings run
in a child process per backend, since the backend is fixed at import
(``HERMITE_STOKES_PURE=1`` selects the fallback).

    python benchmarks/bench_kernels.py --n-modes 8 16
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from hermite_stokes import _pykernels

try:
    from hermite_stokes import _ckernels
except ImportError:
    _ckernels = None


def best(fn, repeat):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def kernel_inputs(n_modes):
    rng = np.random.default_rng(0)
    q = int(np.ceil(1.5 * n_modes))
    x = np.linspace(-6, 6, 4 * q)
    nodes = np.sort(rng.standard_normal(n_modes))
    f = rng.standard_normal((3, n_modes, n_modes, n_modes)) + 1j * rng.standard_normal((3,) + (n_modes,) * 3)
    p = q**3
    u, g, v = rng.standard_normal((3, p)), rng.standard_normal((3, 3, p)), rng.standard_normal((3, p))
    return {
        "hermite_values": lambda m: m.hermite_values(n_modes, x),
        "leray_pointwise": lambda m: m.leray_pointwise(f, nodes),
        "advect_products": lambda m: m.advect_products(u, g, v),
    }


END_TO_END = """
import json, sys, timeit
import numpy as np
from hermite_stokes import kernels
from hermite_stokes.dissipativity import ForceModel
from hermite_stokes.evolution import step_strang
from hermite_stokes.field import random_field
from hermite_stokes.space import get_space
n, repeat = int(sys.argv[1]), int(sys.argv[2])
sp = get_space(n)
u = random_field(0, sp).coeffs
f = ForceModel("constant", 0.1)
jobs = {"leray": lambda: sp.leray(u), "nonlinear": lambda: sp.nonlinear(u, u),
        "strang_step": lambda: step_strang(sp, u, 0.0, 1e-3, 1.0, f)}
out = {}
for name, fn in jobs.items():
    k, _ = timeit.Timer(fn).autorange()
    out[name] = min(timeit.repeat(fn, number=k, repeat=repeat)) / k
print(json.dumps({"backend": kernels.BACKEND, "times": out}))
"""


def end_to_end(n_modes, repeat, pure):
    env = dict(os.environ)
    if pure:
        env["HERMITE_STOKES_PURE"] = "1"
    else:
        env.pop("HERMITE_STOKES_PURE", None)
    res = subprocess.run([sys.executable, "-c", END_TO_END, str(n_modes), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-modes", type=int, nargs="+", default=[8, 16])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)
    results = []
    print(f"{'n':>3} {'what':<18} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8}")
    for n in args.n_modes:
        for name, call in kernel_inputs(n).items():
            tp = best(lambda: call(_pykernels), args.repeat)
            tc = best(lambda: call(_ckernels), args.repeat) if _ckernels else float("nan")
            results.append({"n_modes": n, "what": name, "python": tp, "compiled": tc})
        py = end_to_end(n, args.repeat, True)["times"]
        co = end_to_end(n, args.repeat, False)["times"] if _ckernels else {k: float("nan") for k in py}
        for name in py:
            results.append({"n_modes": n, "what": name, "python": py[name], "compiled": co[name]})
        for r in results[-6:]:
            print(f"{n:>3} {r['what']:<18} {1e3 * r['python']:>12.3f} {1e3 * r['compiled']:>14.3f} "
                  f"{r['python'] / r['compiled']:>8.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
