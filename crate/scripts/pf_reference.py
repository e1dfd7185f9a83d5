#!/usr/bin/env python3
"""Independent power-flow reference for the bundled 39-bus case.

Re-solves the case JSON with pypower's Newton solver (no code shared with
the Rust crate) and writes bus voltages and generator outputs.

Usage: python3 scripts/pf_reference.py crates/core/data/ieee39.json \
           > crates/core/tests/fixtures/ieee39_pf_reference.json
"""
import json
import sys

import numpy as np
from pypower.api import ppoption, runpf


def to_ppc(case):
    base = case["base_mva"]
    ids = [b["id"] for b in case["buses"]]
    gens = {g["bus"]: g for g in case["generators"] if g.get("in_service", True)}
    bus = []
    for b in case["buses"]:
        kind = {"slack": 3, "PV": 2, "PQ": 1}[b["kind"]]
        g = gens.get(b["id"])
        if kind == 2 and (g is None or g.get("Q_g0") is not None):
            kind = 1
        if kind == 1 and g is not None and g.get("Q_g0") is None:
            kind = 2
        bs = sum(s["b"] for s in case["shunts"] if s["bus"] == b["id"] and s.get("status", True))
        vset = b.get("V_set") or 1.0
        bus.append([b["id"], kind, b.get("P_load", 0.0) * base, b.get("Q_load", 0.0) * base,
                    0.0, bs * base, 1, vset, 0.0, 345.0, 1, 1.1, 0.9])
    gen = []
    for bid, g in sorted(gens.items()):
        vset = next(b for b in case["buses"] if b["id"] == bid).get("V_set") or 1.0
        q = g.get("Q_g0") or 0.0
        p = 0.0 if g.get("is_condenser") else g.get("P_g0", 0.0)
        gen.append([bid, p * base, q * base, 9999.0, -9999.0, vset, base, 1, 9999.0, -9999.0]
                   + [0.0] * 11)
    branch = []
    for br in case["branches"]:
        if not br.get("status", True):
            continue
        branch.append([br["from"], br["to"], br["r"], br["x"], br.get("b", 0.0), 0, 0, 0,
                       br.get("ratio", 1.0) if br.get("ratio", 1.0) != 1.0 else 0.0, 0.0, 1, -360, 360])
    return ids, {"version": "2", "baseMVA": base, "bus": np.array(bus, float),
                 "gen": np.array(gen, float), "branch": np.array(branch, float)}


def main():
    case = json.load(open(sys.argv[1]))
    ids, ppc = to_ppc(case)
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-12, PF_MAX_IT=30)
    res, ok = runpf(ppc, opt)
    if not ok:
        sys.exit("reference power flow did not converge")
    out = {
        "bus_ids": ids,
        "vm": [float(v) for v in res["bus"][:, 7]],
        "va_rad": [float(np.deg2rad(a)) for a in res["bus"][:, 8]],
        "gen": {f"bus_{int(g[0])}": {"P": g[1] / case["base_mva"], "Q": g[2] / case["base_mva"]}
                for g in res["gen"]},
    }
    json.dump(out, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
