"""Subgroup discovery in mixed-type tabular data.

K-Prototypes clustering with a subsample-median McClain-Rao rule for the
number of clusters, Hotelling T² checks that clusters differ, and
per-cluster logistic regression to explain each subgroup.
"""

__version__ = "0.1.0"
