#!/usr/bin/env python3
"""Walk the bundled two-domain printing-service example end to end.

Loads the security-core support ontology and the two REI policy files,
prints the detected conflict with its proposals, applies the default
rename, and shows the harmonized domain-B policy.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from smsp.resolution import propose_actions
from smsp.session import (apply_action, create_state, export_bytes,
                          remaining_conflicts)

FIXTURES = ROOT / "fixtures"


def main() -> int:
    support = (FIXTURES / "security-core.json").read_bytes()
    state = create_state(support, [
        {"lang": "rei", "domain_id": "a",
         "text": (FIXTURES / "cloud" / "domain-a.rei").read_text()},
        {"lang": "rei", "domain_id": "b",
         "text": (FIXTURES / "cloud" / "domain-b.rei").read_text()},
    ])
    print(f"session {state.session_id}")
    print(f"summary: {state.summary()}")
    for record in remaining_conflicts(state):
        left, right = record.payload["left"], record.payload["right"]
        print(f"\n{record.kind.value} ({record.form.value}): "
              f"{left['label']}@{left['sop_id']} vs {right['label']}@{right['sop_id']}")
        proposals = propose_actions(record, state.catalogue)
        for i, action in enumerate(proposals.actions):
            marker = " (default)" if i == 0 else ""
            print(f"  proposal {i}: {action}{marker}")
        apply_action(state, proposals.auto_default)
        print(f"applied default -> open conflicts: {state.summary()['open']}")

    harmonized = json.loads(export_bytes(state, "harmonized_policies"))
    for domain in harmonized["domains"]:
        print(f"\nharmonized {domain['domain_id']} ({domain['lang']}):")
        print(domain["text"].rstrip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
