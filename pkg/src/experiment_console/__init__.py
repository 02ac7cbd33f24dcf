"""Command-line entry point for simulating, fitting and evaluating preferential-sampling models"""
