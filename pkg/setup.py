"""
Setup configuration for dynoframe
"""

import re
from pathlib import Path

from setuptools import setup, find_packages

# dynoframe/__init__.py is the only place the version is written.
VERSION = re.search(
    r'^__version__ = "([^"]+)"',
    Path("dynoframe/__init__.py").read_text(encoding="utf-8"),
    flags=re.MULTILINE,
).group(1)

# Read long description from README
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="dynoframe",
    version=VERSION,
    author="Dynoframe Team",
    description=(
        "Structured-text situation frames, attention feature augmentation "
        "and scene-understanding metrics"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],
    packages=find_packages(include=["dynoframe", "dynoframe.*"]),
    package_data={"dynoframe": ["data/*.json"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "tabulate>=0.8.9",
    ],
    extras_require={
        "dev": [
            "pytest>=6.0",
            "pytest-cov>=2.0",
            "pytest-mock>=3.10",
            "black>=21.0",
            "flake8>=3.8",
            "mypy>=0.800",
            "types-tabulate",
            "twine>=3.0",
            "wheel>=0.36",
        ],
    },
    entry_points={"console_scripts": ["dynoframe=dynoframe.cli:main"]},
    keywords="situation-recognition semantic-frames hoi evaluation lora",
    include_package_data=True,
    zip_safe=False,
)
