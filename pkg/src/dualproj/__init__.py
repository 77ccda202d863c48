"""Dual-projection perception with an adaptive sensing radius and a desk-scale episode harness."""
