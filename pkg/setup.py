# /bitflip/setup.py
#
#
# Copyright (C) 2024 The bitflip developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.


from setuptools import setup, find_packages

# Package requirements
reqs = [
    "numpy",
    "scipy",
    "lmfit",
    "tqdm",
]

test_reqs = [
    "pytest",
    "hypothesis",
]

# Package setup
setup(
    name="bitflip",
    version="0.1.0",
    author="The bitflip developers",
    description="Simulation and numerics for the Binary Flipping and Damaged Bits Markov chains.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    license="GPL-3.0-or-later",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=reqs,
    extras_require={"test": test_reqs},
    entry_points={"console_scripts": ["bitflip = bitflip.cli:main"]},
)
