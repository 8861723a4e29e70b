"""Linear programs: model, embedded simplex, BAMOT builders and hedging drivers."""

from .model import EQ, GE, LE, LinearProgram, LpSolution, build, solve

__all__ = ["EQ", "GE", "LE", "LinearProgram", "LpSolution", "build", "solve"]
