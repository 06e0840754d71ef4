#!/usr/bin/env python3
"""Smoke test for the fogpon_py extension module.

Build it first with `cargo build -p fogpon-py --release`, then run
`python3 python/smoke_test.py` from the repository root.
"""

import json
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libfogpon_py.so", "fogpon_py.so", "libfogpon_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("fogpon_py is not built; run: cargo build -p fogpon-py --release")
    # cdylib output is named libfogpon_py.so; Python wants fogpon_py<ext>.
    ext = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    stage = Path(tempfile.mkdtemp(prefix="fogpon_py_"))
    shutil.copy2(built, stage / f"fogpon_py{ext}")
    sys.path.insert(0, str(stage))
    import fogpon_py

    return fogpon_py


def main():
    fp = load_module()

    topo = json.loads(fp.default_topology_json())
    servers = sum(len(r["servers"]) for c in topo["cells"] for r in c["racks"])
    assert servers == 24, f"default fabric has {servers} servers"

    # A single rack (4 servers, ids 0..3) keeps the oracle applicable.
    small = {"cells": [{**topo["cells"][0], "racks": topo["cells"][0]["racks"][:1]}]}
    small_json = json.dumps(small)

    checked = 0
    for seed in range(1, 30):
        sc = fp.generate(4, seed, small_json)
        fast = json.loads(fp.solve(sc))
        slow = json.loads(fp.oracle(sc))
        assert fast["status"] == slow["status"], (seed, fast, slow)
        if fast["status"] != "Optimal":
            continue
        assert abs(fast["power"]["total_w"] - slow["power"]["total_w"]) <= 1e-9
        assert fast["placement"] == slow["placement"], seed

        placement = json.dumps(fast["placement"])
        power = json.loads(fp.power(sc, placement))
        assert abs(power["total_w"] - fast["power"]["total_w"]) <= 1e-9
        assert json.loads(fp.feasibility(sc, placement)) == []

        try:
            base = json.loads(fp.baseline(sc, seed))
        except ValueError:
            pass  # no feasible random draw for this instance
        else:
            base_power = json.loads(fp.power(sc, json.dumps(base)))
            assert fast["power"]["total_w"] <= base_power["total_w"] + 1e-9

        lp = fp.export_lp(sc)
        assert "Minimize" in lp and "Binary" in lp
        checked += 1

    assert checked >= 5, f"only {checked} optimally solved instances exercised"
    print(f"smoke test OK: {checked} instances solved, oracle agreed on all")


if __name__ == "__main__":
    main()
