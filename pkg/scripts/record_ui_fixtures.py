#!/usr/bin/env python3
"""Record API responses for the review-UI contract tests.

Drives the worked two-domain example through the in-process service and
writes each endpoint's JSON (plus the post-decision states) under
frontend/fixtures/. The frontend tests replay these instead of a live
server, so they stay deterministic.
"""

import json
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient

from smsp.service import create_app

FIXTURES = ROOT / "fixtures"
OUT = ROOT / "frontend" / "fixtures"


def dump(name: str, payload) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote frontend/fixtures/{name}")


def main() -> int:
    support = json.loads((FIXTURES / "security-core.json").read_text())
    policies = [
        {"lang": "rei", "domain_id": "a",
         "text": (FIXTURES / "cloud" / "domain-a.rei").read_text()},
        {"lang": "rei", "domain_id": "b",
         "text": (FIXTURES / "cloud" / "domain-b.rei").read_text()},
    ]
    with TemporaryDirectory() as tmp, TestClient(create_app(data_dir=tmp)) as client:
        created = client.post("/sessions", json={
            "support": support, "policies": policies}).json()
        sid = created["session_id"]
        dump("create_session.json", created)
        dump("session.json", client.get(f"/sessions/{sid}").json())
        conflicts = client.get(f"/sessions/{sid}/conflicts").json()
        dump("conflicts_open.json", conflicts)
        dump("correspondences.json",
             client.get(f"/sessions/{sid}/correspondences").json())

        record = conflicts["conflicts"][0]
        action = dict(record["proposals"]["actions"][0])
        action.pop("auto_default", None)
        decision = client.post(
            f"/sessions/{sid}/conflicts/{record['id']}/decision",
            json={"action": action}).json()
        dump("decision_applied.json", decision)
        dump("conflicts_resolved.json",
             client.get(f"/sessions/{sid}/conflicts").json())
        rejected = client.post(
            f"/sessions/{sid}/conflicts/{record['id']}/decision",
            json={"action": action})
        dump("decision_rejected.json",
             {"status": rejected.status_code, "body": rejected.json()})
        dump("report.json", client.get(
            f"/sessions/{sid}/export", params={"what": "report"}).json())

        # a parse failure, for the inline-error rendering test
        broken = client.post("/sessions", json={
            "support": support,
            "policies": [
                {"lang": "rei", "domain_id": "a", "text": "has(P, permit)."},
                policies[1],
            ]})
        dump("create_session_parse_error.json",
             {"status": broken.status_code, "body": broken.json()})
    return 0


if __name__ == "__main__":
    sys.exit(main())
