"""Minimal ctypes driver for the MKL PARDISO complex-symmetric factorization.

Only the upper triangle is stored and factored, which roughly halves memory
against a general LU. ``available()`` is False when no ``mkl_rt`` library can
be loaded; callers then fall back to SuperLU.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import glob
import os
import sys
import tempfile

import numpy as np
import scipy.sparse as sp

_COMPLEX_SYMMETRIC = 6
_LIB = None
_TRIED = False


def _load():
    global _LIB, _TRIED
    if _TRIED:
        return _LIB
    _TRIED = True
    candidates = [os.environ.get("CABLEFEM_MKL_RT"), ctypes.util.find_library("mkl_rt")]
    candidates += sorted(glob.glob(os.path.join(sys.prefix, "lib*", "**", "libmkl_rt.so*"), recursive=True))
    candidates += sorted(glob.glob("/usr/local/lib/libmkl_rt.so*"))
    for path in candidates:
        if not path:
            continue
        try:
            lib = ctypes.CDLL(path)
            fn = lib.pardiso
        except (OSError, AttributeError):
            continue
        p = ctypes.POINTER
        i32 = p(ctypes.c_int32)
        fn.argtypes = [p(ctypes.c_int64), i32, i32, i32, i32, i32, ctypes.c_void_p, i32, i32,
                       i32, i32, i32, i32, ctypes.c_void_p, ctypes.c_void_p, i32]
        fn.restype = None
        _LIB = lib
        break
    return _LIB


def available() -> bool:
    return _load() is not None


class PardisoError(RuntimeError):
    pass


class ComplexSymmetricSolver:
    """Factor once, solve many; release with :meth:`free` (also on GC)."""

    def __init__(self, matrix: sp.spmatrix, max_core_mb: int | None = None, ooc_dir: str | None = None):
        lib = _load()
        if lib is None:
            raise PardisoError("mkl_rt is not available")
        self._fn = lib.pardiso
        upper = sp.triu(sp.csr_matrix(matrix), format="csr")
        upper.sum_duplicates()
        upper.sort_indices()
        self.n = upper.shape[0]
        if np.any(upper.diagonal() == 0):
            raise PardisoError("symmetric mode needs a structurally nonzero diagonal")
        self._data = np.ascontiguousarray(upper.data, dtype=np.complex128)
        self._ia = (upper.indptr + 1).astype(np.int32)
        self._ja = (upper.indices + 1).astype(np.int32)
        self._pt = np.zeros(64, np.int64)
        self.iparm = np.zeros(64, np.int32)
        self.iparm[0] = 1        # user-supplied parameters
        self.iparm[1] = 2        # nested dissection ordering
        self.iparm[7] = 2        # iterative refinement steps
        self.iparm[9] = 8        # pivot perturbation 1e-8
        self.iparm[17] = -1      # report factor fill
        self._scratch = None
        if max_core_mb is not None:
            # keep the factor in memory when it fits, spill it to disk otherwise
            self.iparm[59] = 1
            self._scratch = tempfile.TemporaryDirectory(prefix="cablefem_ooc_", dir=ooc_dir)
            os.environ["MKL_PARDISO_OOC_MAX_CORE_SIZE"] = str(int(max_core_mb))
            # a directory, and MKL wants the trailing separator
            os.environ["MKL_PARDISO_OOC_PATH"] = self._scratch.name + os.sep
        self._live = False
        self._call(11)
        self._live = True
        self._call(22)

    def _call(self, phase: int, rhs=None, out=None, nrhs: int = 1) -> None:
        err = ctypes.c_int32(0)
        p = ctypes.POINTER(ctypes.c_int32)

        def ref(v):
            return ctypes.byref(ctypes.c_int32(v))

        dummy = np.zeros(1, np.complex128)
        b = dummy if rhs is None else rhs
        x = dummy if out is None else out
        self._fn(self._pt.ctypes.data_as(ctypes.POINTER(ctypes.c_int64)), ref(1), ref(1),
                 ref(_COMPLEX_SYMMETRIC), ref(phase), ref(self.n), self._data.ctypes.data,
                 self._ia.ctypes.data_as(p), self._ja.ctypes.data_as(p),
                 np.zeros(0, np.int32).ctypes.data_as(p), ref(nrhs), self.iparm.ctypes.data_as(p),
                 ref(0), b.ctypes.data, x.ctypes.data, ctypes.byref(err))
        if err.value != 0:
            raise PardisoError(f"PARDISO phase {phase} failed with error {err.value}")

    @property
    def fill(self) -> int:
        return int(self.iparm[17])

    @property
    def peak_memory_kb(self) -> int:
        return int(max(self.iparm[14], self.iparm[15] + self.iparm[16]))

    @property
    def out_of_core(self) -> bool:
        return self._scratch is not None and self.iparm[16] > 1024 * int(
            os.environ["MKL_PARDISO_OOC_MAX_CORE_SIZE"])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        b = np.ascontiguousarray(rhs, dtype=np.complex128)
        x = np.zeros_like(b)
        self._call(33, b, x)
        return x

    def free(self) -> None:
        if self._live:
            self._call(-1)
            self._live = False
        if self._scratch is not None:
            self._scratch.cleanup()
            self._scratch = None

    def __del__(self):
        try:
            self.free()
        except Exception:
            pass
