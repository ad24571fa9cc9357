"""Hourly clinical time-series mortality prediction.

Per-hour feature extraction, feature-map reconstruction, a convolutional
tokenizer feeding a transformer encoder, a stage-adaptive prediction head,
feature-space mixing regularizers and an attention-weighted center loss,
all on an in-house reverse-mode autodiff core.
"""

__version__ = "0.1.0"
