# /bitflip/exceptions.py
# Exceptions raised by the bitflip package.
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


class BitflipError(Exception):
    """Base class of all bitflip errors."""


class DomainError(BitflipError, ValueError):
    """An argument lies outside the domain of an operation."""


class CouplingError(BitflipError, RuntimeError):
    """The coordinate-wise domination of a coupled pair was violated."""


class ConfigError(BitflipError, ValueError):
    """
    Invalid experiment configuration.

    Parameters
    ----------
    field : str
        Dotted path of the offending field, e.g. ``"dist.p"``.
    message : str
        Human readable description.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
