"""Out-of-process vision-language scorers for the navigation gateway.

The public surface: the wire codec (:mod:`vlmbridge.wire`), the scoring
pipeline (:mod:`vlmbridge.pipeline`), pluggable model backends
(:mod:`vlmbridge.backends`), and the dial-in service
(:mod:`vlmbridge.service`). ``vlmbridge`` on the command line attaches the
configured roles to a running gateway.
"""

from vlmbridge.backends import BackendLoadError, HashBackend, ScorerBackend, load_backend
from vlmbridge.pipeline import (
    ClipScorer,
    Detection,
    DeticScorer,
    ScoreError,
    SliceDecodeError,
    detections_to_sentence,
    make_scorer,
    split_by_spans,
)
from vlmbridge.service import BridgeConnection, HandshakeError, serve_role

__version__ = "0.1.0"

__all__ = [
    "BackendLoadError",
    "BridgeConnection",
    "ClipScorer",
    "Detection",
    "DeticScorer",
    "HandshakeError",
    "HashBackend",
    "ScoreError",
    "ScorerBackend",
    "SliceDecodeError",
    "detections_to_sentence",
    "load_backend",
    "make_scorer",
    "serve_role",
    "split_by_spans",
    "__version__",
]
