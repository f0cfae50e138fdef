# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Exception hierarchy.

Every exception raised on purpose by the package derives from
:class:`IsoReconError` and, where it makes sense, from the builtin a caller
would naturally catch (``ValueError`` for bad input, ``ArithmeticError`` for
numerical degeneracy).
"""

from __future__ import annotations

__all__ = (
    "ConfigError",
    "DatasetFormatError",
    "DegenerateNormalError",
    "DegeneratePairError",
    "DomainError",
    "IllPosedWarpError",
    "IsoReconError",
    "NoRealSolutionError",
    "UnreconstructableError",
)


class IsoReconError(Exception):
    pass


class DomainError(IsoReconError, ValueError):
    pass


class DegenerateNormalError(DomainError):
    pass


class IllPosedWarpError(IsoReconError, ArithmeticError):
    pass


class DegeneratePairError(IsoReconError, ArithmeticError):
    pass


class NoRealSolutionError(IsoReconError, ArithmeticError):
    pass


class UnreconstructableError(IsoReconError):
    pass


class ConfigError(IsoReconError, ValueError):
    pass


class DatasetFormatError(IsoReconError, ValueError):
    """Malformed dataset file.

    Mirrors ``json.JSONDecodeError``: the location is kept on the instance
    (``path``, 1-based ``lineno``) and rendered into the message.
    """

    def __init__(self, msg: str, path: str, lineno: int | None = None) -> None:
        self.msg = msg
        self.path = path
        self.lineno = lineno
        where = f"{path}:{lineno}" if lineno is not None else path
        super().__init__(f"{where}: {msg}")

    def __reduce__(self):
        return self.__class__, (self.msg, self.path, self.lineno)
