"""Pareto-optimal extreme points of multiobjective LPs via moment relaxations."""

__version__ = "0.1.0"
