"""
Test package for the Q4RPD Delivery Planner
"""
