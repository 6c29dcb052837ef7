"""Deterministic simulator and protocol library for quantum-secured key infrastructure.

Subsystems: quantum channel model (`channel`), quantum-phase driver
(`protocol`), classical post-processing (`postproc`), authentication and
key growing (`auth`), trusted-node networking (`network`), application
consumers (`apps`), and the scenario runner / CLI (`scenario`, `cli`).
"""

__version__ = "0.1.0"
