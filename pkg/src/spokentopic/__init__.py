"""Topic classification of spoken documents from fused deep acoustic and
linguistic features, built on a small numpy autodiff core."""

__version__ = "0.1.0"
