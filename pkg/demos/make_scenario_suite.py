"""Generate the bundled five-scenario evaluation suite.

Writes one labelled scenario per planted structure into scenarios/ so that

    causerank eval scenarios/

prints the per-scenario discounted gains and the summary rows for every
method. Sizes are desk-scale; seeds are fixed, so the suite is fully
reproducible.
"""

import sys
from pathlib import Path

from causerank.synth import ScenarioSpec, generate, write_scenario

SUITE = [
    ("null", ScenarioSpec(n_families=20, features_per_family=3, T=720, seed=101)),
    ("planted", ScenarioSpec(n_families=30, features_per_family=4, T=720, seed=102)),
    (
        "joint",
        ScenarioSpec(
            n_families=30,
            features_per_family=10,
            T=1440,
            seed=103,
            joint_m=10,
            per_feature_corr=0.15,
            n_effects=6,
        ),
    ),
    ("seasonal", ScenarioSpec(n_families=12, T=720, seed=104, period=72)),
    ("chain", ScenarioSpec(n_families=20, T=720, seed=105)),
]


def main(out_dir: str = "scenarios") -> None:
    root = Path(out_dir)
    for kind, spec in SUITE:
        scenario = generate(kind, spec)
        path = write_scenario(scenario, root / kind)
        n_causes = sum(1 for v in scenario.labels.values() if v.value == "cause")
        print(f"{path}: {len(scenario.table)} families, {n_causes} cause(s)")
    print(f"\nevaluate with: causerank eval {root}/")


if __name__ == "__main__":
    main(*sys.argv[1:])
