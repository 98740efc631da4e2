"""Numba switch.

Every hot kernel in the package is written in the numba-compatible subset of
Python. When numba is importable and ``MAIBL_PURE_NUMPY`` is unset, kernels are
compiled with ``numba.njit`` and the agent/memory classes with ``jitclass``.
Setting ``MAIBL_PURE_NUMPY=1`` (or uninstalling numba) makes the decorators
no-ops, and the memory module swaps its loop kernels for vectorized NumPy ones.
The flag is read once, at import time.
"""

import os

PURE_NUMPY = os.environ.get("MAIBL_PURE_NUMPY", "").strip().lower() not in ("", "0", "false", "no")

try:
    if PURE_NUMPY:
        raise ImportError("numba disabled by MAIBL_PURE_NUMPY")
    import numba
    from numba import typed, types
    from numba.experimental import jitclass as _numba_jitclass

    USING_NUMBA = True
except ImportError:
    numba = None
    USING_NUMBA = False


def njit(*args, **kwargs):
    if USING_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def jitclass(spec):
    """Class decorator; ``spec`` is a zero-argument callable returning the numba field spec."""
    if not USING_NUMBA:
        return lambda cls: cls
    return _numba_jitclass(spec())


if USING_NUMBA:
    INT_DICT = types.DictType(types.int64, types.int64)
    FLOAT_DICT = types.DictType(types.int64, types.float64)

    @numba.njit
    def int_dict():
        return typed.Dict.empty(types.int64, types.int64)

    @numba.njit
    def float_dict():
        return typed.Dict.empty(types.int64, types.float64)

else:
    INT_DICT = FLOAT_DICT = None

    def int_dict():
        return {}

    def float_dict():
        return {}


def instance_type(cls):
    """numba type of a jitclass instance, for use inside another class spec."""
    return cls.class_type.instance_type
