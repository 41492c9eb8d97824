"""Time the envelope half sweep: compiled kernel against the numpy fallback.

    python3 benchmarks/bench_envelope.py [--n 17 25] [--repeat 3]

Both backends run the same sweeps on the same data; the script also checks
that the results agree bit for bit.
"""
import argparse
import time

import numpy as np

from ampere_lab import envelope_kernel
from ampere_lab.grid import ball_rho, build_domain
from ampere_lab.potential import _colored_nodes, rotated_offsets, select_directions
from ampere_lab.structure import ModelSpec, make_structure


def setup(n, kind):
    dom = build_domain([(-1.0, 1.0)] * 4, n, ball_rho(1.0))
    J = make_structure(ModelSpec(kind, 0.5 if kind == "twist" else 0.0), dom)
    r = np.sqrt((dom.coordinates() ** 2).sum(-1))
    obst = np.where((r <= 0.5) & dom.interior_mask, -1.0, 0.0)
    offsets = np.ascontiguousarray(select_directions(16), dtype=np.int64)
    return obst, offsets, rotated_offsets(J, offsets), _colored_nodes(dom.inside & ~dom.boundary_band)


def run(backend, obst, offsets, jofs, colours, sweeps):
    u = obst.copy()
    t0 = time.perf_counter()
    for _ in range(sweeps):
        for nodes in colours:
            envelope_kernel.half_sweep(u, u.copy(), obst, nodes, offsets, jofs, backend)
    return time.perf_counter() - t0, u


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[13, 17, 25])
    p.add_argument("--sweeps", type=int, default=5)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--model", choices=["standard", "twist"], default="twist")
    args = p.parse_args()
    if envelope_kernel._compiled is None:
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")
    print(f"{'n':>4} {'nodes':>9} {'compiled s':>11} {'numpy s':>9} {'speedup':>8}  equal")
    for n in args.n:
        obst, offsets, jofs, colours = setup(n, args.model)
        times = {}
        for backend in ("compiled", "numpy"):
            best = min(run(backend, obst, offsets, jofs, colours, args.sweeps)[0]
                       for _ in range(args.repeat))
            times[backend] = best
        a = run("compiled", obst, offsets, jofs, colours, args.sweeps)[1]
        b = run("numpy", obst, offsets, jofs, colours, args.sweeps)[1]
        nodes = sum(len(c) for c in colours)
        print(f"{n:>4} {nodes:>9} {times['compiled']:>11.3f} {times['numpy']:>9.3f} "
              f"{times['numpy'] / times['compiled']:>8.1f}  {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()
