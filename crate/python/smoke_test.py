"""Quick end-to-end check of the Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math
import sys
import tempfile
from pathlib import Path

import critwave


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    out = critwave.classify(3.0, 3.0, 1)
    check(out["report"]["regime"] == "critical", "classify (3, 3, 1) is critical")
    check(out["law"]["form"] == "exp_power" and out["law"]["kappa"] == 2.0, "critical law is exp(C eps^-2)")

    t, lam = 2.5, 7.0
    e = critwave.propagator(t, lam)
    det = e[0][0] * e[1][1] - e[0][1] * e[1][0]
    check(abs(det - math.exp(-t)) < 1e-12, "propagator determinant is exp(-t)")

    problem = {
        "model": "damped_wave",
        "n": 1,
        "p": 3.0,
        "q": 3.0,
        "eps": 1.0,
        "data": {"shape": "smooth_bump", "a_u0": 0.6, "a_v0": 0.6, "radius": 8.0},
    }
    grid = {"L": 128.0, "N": 1024}
    res = critwave.simulate(problem, grid, {"t_max": 200.0, "dt0": 1.0})
    check(res.status == "blew_up" and res.t_num is not None, f"bump data blows up (T = {res.t_num:.3f})")
    summary = res.summary()
    check(summary["boundary_mass_max"] < 1e-6, "solution stays away from the torus boundary")

    traj = res.trajectory
    check(len(traj) >= 2 and traj.fields[0] == "u", "trajectory has frames")
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "traj.bin"
        traj.save(str(path))
        again = critwave.Trajectory.load(str(path))
        check(again.times == traj.times and again.frame(0) == traj.frame(0), "trajectory round trip")

    table = critwave.run_sweep(problem, [1.3, 1.1, 0.95, 0.8], [{"L": 128.0, "N": 1024}], {"t_max": 400.0, "dt0": 1.0})
    check(len(table) == 4, "sweep produced one row per eps")
    fit = table.fit("critical")
    check(fit["r_squared"] > 0.9, f"critical fit kappa_hat = {fit['kappa_hat']:.3f}, r2 = {fit['r_squared']:.4f}")
    same = critwave.SweepTable.from_csv(table.to_csv())
    check(same.to_csv() == table.to_csv(), "sweep table CSV round trip")

    try:
        critwave.classify(0.5, 3.0, 1)
    except ValueError:
        check(True, "invalid exponent raises ValueError")
    else:
        check(False, "invalid exponent raises ValueError")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
