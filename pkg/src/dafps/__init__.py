"""Density-aware farthest point sampling and training-subset selection."""
