"""Smoke test for the `qdeficiency` Python extension.

Builds the extension with cargo (unless --no-build), loads it from a
temporary directory and checks a handful of known values.

    python3 python/smoke_test.py
"""

import argparse
import json
import math
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build() -> None:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "qdeficiency-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )


def load(tmp: Path):
    lib = ROOT / "target" / "release" / "libqdeficiency_py.so"
    if not lib.exists():
        sys.exit(f"extension not found at {lib}; run without --no-build")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, tmp / f"qdeficiency{suffix}")
    sys.path.insert(0, str(tmp))
    import qdeficiency

    return qdeficiency


def check(name: str, ok: bool) -> bool:
    print(f"{'ok  ' if ok else 'FAIL'} {name}")
    return ok


def run(q) -> bool:
    results = []
    zero = q.DensityOperator.basis_state(2, 0)
    one = q.DensityOperator.basis_state(2, 1)
    plus = q.DensityOperator.pure([1.0, 1.0])
    mixed = q.DensityOperator([[0.5, 0.0], [0.0, 0.5]])

    results.append(check("trace distance of orthogonal states is 2", abs(q.trace_distance(zero, one) - 2.0) < 1e-12))
    results.append(check("fidelity |0> vs |+> is 1/sqrt2", abs(q.fidelity(zero, plus) - math.sqrt(0.5)) < 1e-12))
    results.append(check("alpha divergence of equal states is 0", abs(q.alpha_divergence(0.5, mixed, mixed)) < 1e-12))

    dep = q.Channel.depolarizing(0.3, 2)
    results.append(check("depolarizing contraction is 1.4", abs(dep.contraction() - 1.4) < 1e-8))
    out = dep.apply(zero)
    re, _ = out.to_lists()
    results.append(check("depolarizing output diag", abs(re[0][0] - 0.85) < 1e-12))

    poles = q.StateFamily([("a", zero), ("b", one)])
    noisy = poles.map_channel(dep)
    fw = q.deficiency(poles, noisy)
    results.append(check("delta(E, L(E)) = 0 (randomization)", fw["value"] <= 1e-6 and fw["channel"] is not None))
    bw = q.deficiency(noisy, poles)
    # Each pole became (0.85, 0.15); the best recovery is the identity,
    # leaving ||(0.85, 0.15) - (1, 0)||_1 = 0.3.
    results.append(check("delta(L(E), E) = 0.3", abs(bw["value"] - 0.3) < 1e-6))
    results.append(check("Delta is the max", abs(q.deficiency_distance(poles, noisy) - 0.3) < 1e-6))
    results.append(check("Chebyshev radius of poles is 1", abs(q.chebyshev(poles) - 1.0) < 1e-6))
    results.append(
        check(
            "classical dichotomy delta = 0.2",
            abs(q.classical_deficiency([[0.9, 0.1], [0.1, 0.9]], [[1.0, 0.0], [0.0, 1.0]]) - 0.2) < 1e-6,
        )
    )

    config = json.loads((ROOT / "configs" / "depolarizing.json").read_text())
    trace, summary = q.run_scenario(json.dumps(config), "ergodicity")
    results.append(check("trace.csv schema header", trace.startswith("# schema=1\n")))
    results.append(check("ergodic_at = 41", json.loads(summary)["ergodicity"]["ergodic_at"] == 41))

    try:
        q.Channel.depolarizing(-0.1, 2)
        results.append(check("invalid parameter raises ValueError", False))
    except ValueError:
        results.append(check("invalid parameter raises ValueError", True))

    rows = q.selftest("fuchs-van-de-graaf")
    results.append(check("selftest suite passes", len(rows) == 1 and rows[0][2]))
    return all(results)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--no-build", action="store_true", help="use the existing build")
    args = parser.parse_args()
    if not args.no_build:
        build()
    with tempfile.TemporaryDirectory() as tmp:
        q = load(Path(tmp))
        ok = run(q)
    print("smoke test passed" if ok else "smoke test FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
