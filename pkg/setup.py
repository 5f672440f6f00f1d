#!/usr/bin/env python
"""
Bipolar CPWM - Setup

This module provides the setup configuration for the bipolar counter-propagating
wave scattering solver.
"""

from setuptools import setup, find_packages

setup(
    name="bipolar_cpwm",
    version="0.1.0",
    description="Bipolar counter-propagating wave method for one-dimensional multisurface quantum scattering",
    author="",
    author_email="",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    include_package_data=True,
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pyyaml>=6.0",
        "pydantic>=2.0",
        "anyio>=4.0.0",
        "typing_extensions>=4.7.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "black>=23.7.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "bipolar-cpwm=cpwm_solver.main:main",
        ],
    },
    python_requires=">=3.10",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
