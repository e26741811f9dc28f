"""Excitation-number convergence in the bond-dimension cap.

    python scripts/bond_convergence.py --n 6 --eta 0.6 --chis 32 64 128 --t-max 10
"""

import argparse
import time

import numpy as np

from wgdelay import observables as ob
from wgdelay.cli import relative_deviation
from wgdelay.collision import ModelParams, Simulation
from wgdelay.tensor_core import TruncationPolicy


def series(n, eta, gamma_dt, t_max, chi, stride):
    p = ModelParams.from_eta(n, eta, gamma_dt, t_max=t_max, policy=TruncationPolicy(chi, 1e-10))
    sim = Simulation(p)
    obs = ob.Observer(stride=stride, blocks=frozenset())
    obs(sim)
    while not sim.done:
        sim.advance()
        obs(sim)
    t = np.array([r.t for r in obs.records])
    return t, np.array([r.n_exc for r in obs.records]), np.array([r.discarded for r in obs.records])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--eta", type=float, default=0.6)
    ap.add_argument("--gamma-dt", type=float, default=0.02)
    ap.add_argument("--t-max", type=float, default=10.0)
    ap.add_argument("--chis", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--stride", type=int, default=5)
    ap.add_argument("--out", default=None, help="write t, N_exc and discarded weight per chi to this CSV prefix")
    args = ap.parse_args()
    runs = {}
    for chi in args.chis:
        start = time.perf_counter()
        runs[chi] = series(args.n, args.eta, args.gamma_dt, args.t_max, chi, args.stride)
        print(f"chi={chi}: N_exc(t_max)={runs[chi][1][-1]:.5f} discarded={runs[chi][2][-1]:.2e} ({time.perf_counter() - start:.0f} s)", flush=True)
        if args.out:
            np.savetxt(f"{args.out}_chi{chi}.csv", np.column_stack(runs[chi]), delimiter=",", header="t,n_exc,discarded", comments="")
    best = max(args.chis)
    for chi in args.chis:
        if chi != best:
            dev = relative_deviation(*runs[chi][:2], *runs[best][:2])
            t, a = runs[chi][:2]
            rel = np.abs(a - np.interp(t, *runs[best][:2])) / np.abs(np.interp(t, *runs[best][:2]))
            print(f"chi={chi} vs {best}: max rel {dev.max_rel:.2e} at t={t[np.argmax(rel)]:.2f}, rms rel {dev.rms_rel:.2e}")


if __name__ == "__main__":
    main()
