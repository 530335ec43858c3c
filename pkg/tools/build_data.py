#!/usr/bin/env python3
"""Regenerate the committed simulated-world preset from the provider DB.

The preset is generated data: edit worlds.py (or providers.json) and
re-run this script. A regression test asserts the committed files match
a fresh regeneration, so drift gets caught.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from dvahunter.providers import load_provider_db  # noqa: E402
from dvahunter.simnet import scenario_to_json, validate_scenario  # noqa: E402
from dvahunter.worlds import build_reference_world  # noqa: E402

DATA = ROOT / "src" / "dvahunter" / "data"


def main() -> None:
    db = load_provider_db(DATA / "providers.json")
    world = build_reference_world(db)
    problems = validate_scenario(world.scenario, db)
    if problems:
        raise SystemExit("preset failed validation: " + "; ".join(problems))
    scenario_path = DATA / "reference_world.json"
    scenario_path.write_text(
        json.dumps(scenario_to_json(world.scenario), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    targets_path = DATA / "reference_world_targets.txt"
    targets_path.write_text(
        "# scan targets for the bundled 45-provider simulated world\n"
        + "\n".join(world.targets)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {scenario_path} ({scenario_path.stat().st_size} bytes)")
    print(f"wrote {targets_path} ({len(world.targets)} targets)")


if __name__ == "__main__":
    main()
