"""Scalar special functions callable from numba-compiled code.

``erfcx`` is bound to scipy's compiled implementation through the C API
exported by :mod:`scipy.special.cython_special`, so jitted samplers and the
vectorized kernel module evaluate the very same routine.
"""

import ctypes
import math

import numba
import scipy.special.cython_special as _cs

_get_name = ctypes.pythonapi.PyCapsule_GetName
_get_name.restype = ctypes.c_char_p
_get_name.argtypes = [ctypes.py_object]
_get_pointer = ctypes.pythonapi.PyCapsule_GetPointer
_get_pointer.restype = ctypes.c_void_p
_get_pointer.argtypes = [ctypes.py_object, ctypes.c_char_p]


def _double_capsule(name):
    # the double specialization of a fused-type function is the one taking
    # (double, int skip_dispatch)
    for key, capsule in _cs.__pyx_capi__.items():
        if key.endswith(name) and _get_name(capsule).startswith(b"double (double"):
            addr = _get_pointer(capsule, _get_name(capsule))
            return ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_double, ctypes.c_int)(addr)
    raise ImportError(f"scipy.special.cython_special does not export a double {name}")


_erfcx_c = _double_capsule("erfcx")

SQRT_PI = math.sqrt(math.pi)
SQRT2 = math.sqrt(2.0)


@numba.njit(nogil=True)
def erfcx(x):
    """exp(x**2) * erfc(x) without overflow."""
    return _erfcx_c(x, 0)


@numba.njit(nogil=True)
def norm_sf(z):
    """Standard normal survival function."""
    return 0.5 * math.erfc(z / SQRT2)
