"""
Bipolar CPWM Components Package
"""
