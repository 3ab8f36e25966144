"""Setup configuration for noncollide package."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="noncollide",
    version="0.1.0",
    author="noncollide developers",
    description="Simulation and verification of non-colliding particle systems with singular repulsion",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.10",
    install_requires=[
        "numpy>=2.0",
        "scipy>=1.13",
        "pandas>=2.2",
        "pydantic>=2.7",
        "langgraph>=0.6",
        "python-dotenv>=1.0.0",
        "PyYAML>=6.0",
        "click>=8.1",
        "python-json-logger>=3.1",
        "lark>=1.2",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=4.0.0",
            "pytest-mock>=3.0.0",
            "black>=23.0.0",
            "ruff>=0.1.0",
            "mypy>=1.0.0",
        ]
    },
    entry_points={
        "console_scripts": [
            "noncollide=noncollide.cli:main",
        ],
    },
)
