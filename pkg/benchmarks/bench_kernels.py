"""Compare the compiled and NumPy face kernels.

Times ``face_blocks`` (flux plus both Jacobian blocks) on random admissible
face data, then a short end-to-end run with each backend in a subprocess.

    python benchmarks/bench_kernels.py [--faces 20000] [--species 3] [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from crossdiff import _kernels_py

try:
    from crossdiff import _kernels as compiled
except ImportError:
    compiled = None

END_TO_END = """
import time, warnings
warnings.simplefilter("ignore")
from crossdiff import BACKEND
from crossdiff.experiments import get_case
from crossdiff.solver import simulate
c = get_case("A_reg_rough"); m = c.mesh(256)
t = time.perf_counter()
simulate(c.initial_state(m), c.time_grid(2.0 ** -10), c.matrix(), m, diagnostics=False,
         stride=1024)
print(BACKEND, time.perf_counter() - t)
"""


def face_data(n_faces, n_species, seed=0):
    rng = np.random.default_rng(seed)
    uK = rng.dirichlet(np.ones(n_species), n_faces)
    uL = rng.dirichlet(np.ones(n_species), n_faces)
    A = rng.uniform(0, 1, (n_species, n_species))
    A = A + A.T
    np.fill_diagonal(A, 0.0)
    B = A - 0.1
    np.fill_diagonal(B, 0.0)
    tau = np.ones(n_faces)
    return uK, uL, tau, B


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--faces", type=int, default=20000)
    p.add_argument("--species", type=int, default=3)
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    uK, uL, tau, B = face_data(args.faces, args.species)
    rows = [("python", _kernels_py)] + ([("cython", compiled)] if compiled else [])
    times = {}
    for name, mod in rows:
        t = min(timeit.repeat(lambda: mod.face_blocks(uK, uL, tau, B, 0.1, True),
                              number=1, repeat=args.repeat))
        times[name] = t
        print(f"face_blocks  {name:7s} {t * 1e3:9.3f} ms  "
              f"({args.faces} faces, {args.species} species)")
    if compiled:
        print(f"face_blocks  speedup {times['python'] / times['cython']:.2f}x")
        ref = _kernels_py.face_blocks(uK, uL, tau, B, 0.1, True)
        got = compiled.face_blocks(uK, uL, tau, B, 0.1, True)
        diff = max(float(np.abs(a - b).max()) for a, b in zip(ref, got))
        print(f"face_blocks  max backend difference {diff:.2e}")
    for pure in (True, False):
        env = dict(os.environ)
        if pure:
            env["CROSSDIFF_PURE_PYTHON"] = "1"
        else:
            env.pop("CROSSDIFF_PURE_PYTHON", None)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"end-to-end   {out[0]:7s} {float(out[1]):9.3f} s  (256 cells, 256 steps)")


if __name__ == "__main__":
    main()
