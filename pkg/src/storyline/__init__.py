"""Video-to-SVO translation with stacked linear classifiers over salient visual features."""

__version__ = "0.1.0"

SLOTS = ("subject", "verb", "object")
