"""Python front end for the tilin certifier."""

import json

from ._tilin import (  # noqa: F401
    DimensionError,
    Network,
    ParseError,
    activation,
    attack_radius,
    compute_bounds,
    load_network,
    maxpool_upper,
    parse_network,
    relax,
    run_cli,
)
from ._tilin import certify_json as _certify_json


def certify(net, x, label, norm="inf", policy="forward", eps0=0.05, iterations=15):
    """Certification report as a dict (see the CLI's verify output)."""
    return json.loads(_certify_json(net, x, label, norm, policy, eps0, iterations))
