"""RegionAtlas: bounds, exact counts and estimates of the linear regions of ReLU GCNs."""

__version__ = "1.0.0"
