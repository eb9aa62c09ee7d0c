"""Batch entry points for the matching pipeline, plus the API server.

Subcommands:

* ``align``    run the pipeline, write artifacts, report open conflicts.
* ``resolve``  same, then resolve conflicts: ``--auto`` takes each open
               conflict's first proposed action, ``--decisions FILE``
               applies a recorded decision list.
* ``export``   print one artifact (enriched ontology, correspondences,
               harmonized policies or report) to stdout or a file.
* ``serve``    run the HTTP API.

Exit codes are the machine contract: 0 when no open conflicts remain,
1 when open conflicts remain, 2 on input errors. Stdout is for humans.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .ontology import OntologyError
from .policy import LANG_EXTENSIONS, ParseError, SourceLang, print_policy_set
from .resolution import (Catalogue, DEFAULT_CATALOGUE, Decider, ResolutionError,
                         action_from_doc, load_catalogue, propose_actions)
from .session import (SessionError, SessionState, apply_action, create_state,
                      export_bytes, remaining_conflicts)
from .similarity import SimilarityConfig


@dataclass
class PipelineConfig:
    support: Path
    policies: list[dict]  # {lang, domain_id, path}
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    catalogue: Optional[Path] = None
    deontic_table: Optional[dict] = None
    auto_resolve: bool = False
    output_dir: Path = Path("out")

    def validate(self) -> None:
        if len(self.policies) < 2:
            raise SessionError("need at least 2 policy inputs")
        if not self.support.exists():
            raise SessionError(f"support ontology not found: {self.support}")
        for p in self.policies:
            if not Path(p["path"]).exists():
                raise SessionError(f"policy file not found: {p['path']}")
        if self.catalogue is not None and not self.catalogue.exists():
            raise SessionError(f"catalogue not found: {self.catalogue}")


def _parse_policy_flag(raw: str) -> dict:
    parts = raw.split(":", 2)
    if len(parts) != 3:
        raise SessionError(f"--policy expects lang:domain:path, got {raw!r}")
    lang, domain, path = parts
    return {"lang": lang, "domain_id": domain, "path": path}


def load_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    doc: dict = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise SessionError(f"config file not found: {cfg_path}")
        try:
            doc = json.loads(cfg_path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise SessionError(f"malformed config file: {exc}") from exc

    policies = [dict(p) for p in doc.get("policies", ())]
    if getattr(args, "policy", None):
        policies.extend(_parse_policy_flag(p) for p in args.policy)
    support = getattr(args, "support", None) or doc.get("support")
    if not support:
        raise SessionError("no support ontology given (config 'support' or --support)")
    try:
        similarity = SimilarityConfig.from_doc(doc.get("similarity"))
    except ValueError as exc:
        raise SessionError(f"invalid similarity config: {exc}") from exc
    for flag in ("syn_threshold", "homonym_semantic_ceiling", "anchor_threshold"):
        value = getattr(args, flag, None)
        if value is not None:
            similarity = SimilarityConfig.from_doc({**similarity.to_doc(), flag: value})
    catalogue = getattr(args, "catalogue", None) or doc.get("catalogue")
    output_dir = getattr(args, "out", None) or doc.get("output_dir", "out")
    cfg = PipelineConfig(
        support=Path(support),
        policies=policies,
        similarity=similarity,
        catalogue=Path(catalogue) if catalogue else None,
        deontic_table=doc.get("deontic_table"),
        auto_resolve=bool(doc.get("auto_resolve", False)),
        output_dir=Path(output_dir),
    )
    cfg.validate()
    return cfg


def build_state(cfg: PipelineConfig) -> SessionState:
    catalogue: Catalogue = DEFAULT_CATALOGUE
    if cfg.catalogue is not None:
        catalogue = load_catalogue(cfg.catalogue.read_bytes())
    policies = []
    for p in cfg.policies:
        try:
            lang = SourceLang(p["lang"])
        except ValueError:
            raise SessionError(f"unknown policy language {p['lang']!r}") from None
        try:
            text = Path(p["path"]).read_text("utf-8")
        except UnicodeDecodeError as exc:
            raise SessionError(f"{p['path']}: not valid UTF-8 ({exc.reason})") from exc
        policies.append({"lang": lang.value, "domain_id": p["domain_id"],
                         "text": text})
    return create_state(cfg.support.read_bytes(), policies, cfg=cfg.similarity,
                        catalogue=catalogue, deontic_table=cfg.deontic_table)


def auto_resolve(state: SessionState) -> int:
    """Apply each open conflict's first proposed action until quiescent."""
    applied = 0
    guard = 4 * len(state.conflicts) + 8
    while guard > 0:
        guard -= 1
        actionable = None
        for record in remaining_conflicts(state):
            proposals = propose_actions(record, state.catalogue)
            if proposals.actions:
                actionable = proposals.actions[0]
                break
        if actionable is None:
            break
        apply_action(state, replace(actionable, decided_by=Decider.AUTO_DEFAULT))
        applied += 1
    return applied


def apply_decisions_file(state: SessionState, path: Path) -> int:
    try:
        doc = json.loads(path.read_text("utf-8"))
        decisions = doc["decisions"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SessionError(f"malformed decisions file: {exc}") from exc
    for entry in decisions:
        action = action_from_doc({**entry["action"],
                                  "conflict_id": entry["conflict_id"]})
        apply_action(state, action)
    return len(decisions)


def write_artifacts(state: SessionState, out_dir: Path,
                    harmonized: bool) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, payload: bytes):
        path = out_dir / name
        path.write_bytes(payload)
        written.append(path)

    emit("correspondences.json", export_bytes(state, "correspondences"))
    emit("enriched-ontology.json", export_bytes(state, "enriched_ontology"))
    emit("enriched-ontology.ttl", export_bytes(state, "enriched_ontology", "turtle"))
    emit("report.json", export_bytes(state, "report"))
    if harmonized:
        emit("harmonized-policies.json", export_bytes(state, "harmonized_policies"))
        harm_dir = out_dir / "harmonized"
        harm_dir.mkdir(exist_ok=True)
        for p in state.inputs:
            text = print_policy_set(state.policy_sets[p.domain_id], p.lang)
            path = harm_dir / f"{p.domain_id}.{LANG_EXTENSIONS[p.lang]}"
            path.write_text(text, "utf-8")
            written.append(path)
    return written


def _print_summary(state: SessionState, out=sys.stdout) -> None:
    summary = state.summary()
    print(f"session {state.session_id}", file=out)
    for kind in ("NamingSynonym", "NamingHomonym", "ModalityOpposition"):
        print(f"  {kind}: {summary[kind]} open", file=out)
    print(f"  resolved: {summary['resolved']}", file=out)
    for record in remaining_conflicts(state):
        left = record.payload.get("left", {})
        right = record.payload.get("right", {})
        detail = ""
        if "label" in left:
            detail = f" {left.get('label')}@{left.get('sop_id')}" \
                     f" / {right.get('label')}@{right.get('sop_id')}"
        elif "policy" in left:
            detail = f" {left.get('policy')} vs {right.get('policy')}"
        print(f"  open: {record.kind.value} [{record.form.value}]{detail}", file=out)


def cmd_align(args: argparse.Namespace) -> int:
    cfg = load_pipeline_config(args)
    state = build_state(cfg)
    write_artifacts(state, cfg.output_dir, harmonized=False)
    _print_summary(state)
    return 0 if not remaining_conflicts(state) else 1


def cmd_resolve(args: argparse.Namespace) -> int:
    cfg = load_pipeline_config(args)
    state = build_state(cfg)
    if args.decisions:
        applied = apply_decisions_file(state, Path(args.decisions))
    else:
        applied = auto_resolve(state)
    write_artifacts(state, cfg.output_dir, harmonized=True)
    _print_summary(state)
    print(f"  decisions applied: {applied}")
    return 0 if not remaining_conflicts(state) else 1


def cmd_export(args: argparse.Namespace) -> int:
    cfg = load_pipeline_config(args)
    state = build_state(cfg)
    if args.decisions:
        apply_decisions_file(state, Path(args.decisions))
    elif args.auto:
        auto_resolve(state)
    payload = export_bytes(state, args.what, args.format)
    if args.output:
        Path(args.output).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.bind.rpartition(":")
    app = create_app(data_dir=args.data_dir, static_dir=args.static)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="pipeline config document (JSON)")
    sub.add_argument("--support", help="support ontology path")
    sub.add_argument("--policy", action="append",
                     help="policy input as lang:domain:path (repeatable)")
    sub.add_argument("--catalogue", help="resolution catalogue path")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--syn-threshold", dest="syn_threshold", type=float)
    sub.add_argument("--homonym-semantic-ceiling", dest="homonym_semantic_ceiling",
                     type=float)
    sub.add_argument("--anchor-threshold", dest="anchor_threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smsp",
        description="Align heterogeneous security policies over a support "
                    "ontology; detect and resolve naming and modality conflicts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="run the pipeline without resolving")
    _add_pipeline_flags(p_align)
    p_align.set_defaults(fn=cmd_align)

    p_resolve = sub.add_parser("resolve", help="run the pipeline and resolve")
    _add_pipeline_flags(p_resolve)
    group = p_resolve.add_mutually_exclusive_group(required=True)
    group.add_argument("--auto", action="store_true",
                       help="apply each conflict's first proposed action")
    group.add_argument("--decisions", help="decision list document to apply")
    p_resolve.set_defaults(fn=cmd_resolve)

    p_export = sub.add_parser("export", help="print one artifact")
    _add_pipeline_flags(p_export)
    p_export.add_argument("--what", required=True,
                          choices=["enriched_ontology", "correspondences",
                                   "harmonized_policies", "report"])
    p_export.add_argument("--format", default="canonical",
                          choices=["canonical", "turtle"])
    p_export.add_argument("--auto", action="store_true",
                          help="auto-resolve before exporting")
    p_export.add_argument("--decisions", help="decision list document to apply")
    p_export.add_argument("-o", "--output", help="write to a file instead of stdout")
    p_export.set_defaults(fn=cmd_export)

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--bind", default="127.0.0.1:8421", help="host:port")
    p_serve.add_argument("--data-dir", help="session persistence root "
                                            "(default $SMSP_DATA_DIR or ./smsp-data)")
    p_serve.add_argument("--static", help="static assets directory for the review UI")
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SessionError, ResolutionError, OntologyError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
