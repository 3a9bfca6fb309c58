"""Set alignment of learned 3D part proposals (partlets) to part descriptions.

Core pipeline: point-cloud geometry -> bi-directional cross-attention fusion ->
partlet decoding -> optimal-transport / exact assignment to text embeddings ->
confidence-calibrated naming, plus evaluation metrics, vocabulary compression,
and a confidence-routed human review service.
"""

__version__ = "0.1.0"
