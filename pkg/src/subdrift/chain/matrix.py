"""Exact computations for finite kernels."""
import numpy as np

from ..errors import CapabilityError, ContractError


def _matrix(kernel) -> np.ndarray:
    if not getattr(kernel, "finite_matrix", False):
        raise CapabilityError(f"{type(kernel).__name__} has no finite transition matrix")
    return kernel.P if hasattr(kernel, "P") else kernel.to_matrix()


def matrix_power_distribution(kernel, x: int, n: int) -> np.ndarray:
    """Row ``x`` of ``P^n`` by binary exponentiation."""
    P = _matrix(kernel)
    if n < 0:
        raise ContractError("n must be >= 0")
    row = np.zeros(P.shape[0])
    row[x] = 1.0
    M = P.copy()
    while n:
        if n & 1:
            row = row @ M
        n >>= 1
        if n:
            M = M @ M
    return row


def stationary_vector(kernel) -> np.ndarray:
    """Left Perron eigenvector of ``P`` normalized to a probability vector."""
    P = _matrix(kernel)
    w, v = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, i])
    return pi / pi.sum()
