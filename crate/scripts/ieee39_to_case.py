#!/usr/bin/env python3
"""Build the bundled 39-bus case file from the public MATPOWER listing.

Static network data comes from `pypower.case39` (identical to MATPOWER's
case39.m). Machine data is the classic 10-machine New England set on the
100 MVA system base. Exciter, condenser, shunt and motor-share choices are
repo defaults documented in README.md.

Usage: python3 scripts/ieee39_to_case.py > crates/core/data/ieee39.json
"""
import json
import sys

from pypower.api import case39

# bus: (H, x_l, x_d, x_d', x_q, T'_d0)
MACHINES = {
    39: (500.0, 0.003, 0.02, 0.006, 0.019, 7.0),
    31: (30.3, 0.035, 0.295, 0.0697, 0.282, 6.56),
    32: (35.8, 0.0304, 0.2495, 0.0531, 0.237, 5.7),
    33: (28.6, 0.0295, 0.262, 0.0436, 0.258, 5.69),
    34: (26.0, 0.054, 0.67, 0.132, 0.62, 5.4),
    35: (34.8, 0.0224, 0.254, 0.05, 0.241, 7.3),
    36: (26.4, 0.0322, 0.295, 0.049, 0.292, 5.66),
    37: (24.3, 0.028, 0.29, 0.057, 0.28, 6.7),
    38: (34.5, 0.0298, 0.2106, 0.057, 0.205, 4.79),
    30: (42.0, 0.0125, 0.1, 0.031, 0.069, 10.2),
}
EXCITER_KA = 5.0
EXCITER_TE = 0.3
# Speed damping as a multiple of inertia: D / 2H = 0.25 1/s.
DAMPING_PER_H = 0.5

# 300 MVA synchronous condenser, own-base data scaled to 100 MVA.
CONDENSER_RATING = 3.0
CONDENSER_OWN = dict(x_d=1.6, x_d_prime=0.25, x_q=1.0, x_l=0.15, T_d0_prime=8.0, H=1.5)
CONDENSER_BUSES = [4, 14, 15, 16, 17, 21, 24]
CONDENSER_KA = 50.0
CONDENSER_TE = 0.05

SHUNTS = [
    ("C4", 4, 1.0, True),
    ("C8", 8, 1.0, True),
    ("C15", 15, 0.5, True),
    ("C20", 20, 1.0, False),
    ("R16", 16, -0.5, False),
]
MOTOR_SHARE = 0.3
MOTOR_MIN_LOAD_MW = 100.0


def main():
    ppc = case39()
    base = ppc["baseMVA"]
    gens = {int(g[0]): g for g in ppc["gen"]}
    buses = []
    for b in ppc["bus"]:
        bid, btype = int(b[0]), int(b[1])
        kind = {3: "slack", 2: "PV", 1: "PQ"}[btype]
        rec = {"id": bid, "kind": kind}
        if bid in gens:
            rec["V_set"] = float(gens[bid][5])
        elif bid in CONDENSER_BUSES:
            rec["V_set"] = 1.02
        rec["P_load"] = round(b[2] / base, 6)
        rec["Q_load"] = round(b[3] / base, 6)
        rec["motor_share"] = MOTOR_SHARE if (btype == 1 and b[2] >= MOTOR_MIN_LOAD_MW) else 0.0
        buses.append(rec)

    branches = []
    for br in ppc["branch"]:
        rec = {"from": int(br[0]), "to": int(br[1]), "r": br[2], "x": br[3], "b": br[4]}
        if br[8] != 0.0:
            rec["ratio"] = br[8]
        branches.append(rec)

    generators = []
    for bid in sorted(gens):
        g = gens[bid]
        h, xl, xd, xdp, xq, td0 = MACHINES[bid]
        generators.append({
            "id": f"G{bid}", "bus": bid, "P_g0": round(g[1] / base, 6),
            "x_d": xd, "x_d_prime": xdp, "x_q": xq, "x_ad": round(xd - xl, 6),
            "T_d0_prime": td0, "K_A": EXCITER_KA, "T_e": EXCITER_TE,
            "Q_max": g[3] / base, "H": h, "D": DAMPING_PER_H * h,
        })
    c = CONDENSER_OWN
    s = CONDENSER_RATING
    for bid in CONDENSER_BUSES:
        generators.append({
            "id": f"SC{bid}", "bus": bid, "P_g0": 0.0,
            "x_d": round(c["x_d"] / s, 6), "x_d_prime": round(c["x_d_prime"] / s, 6),
            "x_q": round(c["x_q"] / s, 6), "x_ad": round((c["x_d"] - c["x_l"]) / s, 6),
            "T_d0_prime": c["T_d0_prime"], "K_A": CONDENSER_KA, "T_e": CONDENSER_TE,
            "Q_max": s, "is_condenser": True, "in_service": False, "H": c["H"] * s,
            "D": DAMPING_PER_H * c["H"] * s,
        })

    shunts = [{"id": i, "bus": b, "b": v, "status": on} for i, b, v, on in SHUNTS]
    case = {
        "base_mva": base, "f0": 60.0, "buses": buses, "branches": branches,
        "generators": generators, "motors": [], "shunts": shunts,
    }
    json.dump(case, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
