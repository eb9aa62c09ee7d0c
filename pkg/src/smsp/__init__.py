"""Security policy matching workbench.

Parses security policies written in a REI-Prolog subset, a Ponder subset,
or a KAOS-style JSON document; transforms each policy set into a policy
ontology; aligns those ontologies against a support security ontology to
detect naming (synonym/homonym) and modality conflicts; enriches the
support ontology with derived semantic relations; and applies expert
resolution actions (rename, merge, delete) from a rule catalogue.
"""

__version__ = "0.1.0"
