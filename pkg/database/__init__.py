"""Observation records, dataset files, bundle storage and dataset statistics."""
