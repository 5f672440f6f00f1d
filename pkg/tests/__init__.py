"""
Bipolar CPWM Tests Package
"""
