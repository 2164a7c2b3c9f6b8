"""Model-predictive-control workbench for a planar biped with shaped costs."""

__version__ = "0.1.0"
