"""Benchmark harness: configs, experiments, CSV traces and SVG plots."""
