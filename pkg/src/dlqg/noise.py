"""Counter-based Gaussian noise.

Every draw is a pure function of ``(seed, run, stream, k)``: the Philox
key is ``(seed, run)``, the top counter word is the stream id and step
``k`` owns raw words ``[2 k d, 2 (k + 1) d)``.  Raw 64-bit words become
uniforms on (0, 1) as ``((w >> 11) + 0.5) / 2**53`` and pairs of uniforms
become normals through the cosine branch of Box-Muller.  Controllers
compared on the same ``(seed, run)`` therefore see identical noise.
"""

import numpy as np

STREAM_X0 = 0
STREAM_W = 1
STREAM_V = 2


def standard_normals(seed: int, run: int, stream: int, steps: int, dim: int) -> np.ndarray:
    """Array of shape ``(steps, dim)`` of independent N(0, 1) draws."""
    key = np.array([seed, run], dtype=np.uint64)
    counter = np.array([0, 0, 0, stream], dtype=np.uint64)
    raw = np.random.Philox(key=key, counter=counter).random_raw(steps * 2 * dim)
    unif = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    unif = unif.reshape(steps, 2, dim)
    return np.sqrt(-2.0 * np.log(unif[:, 0])) * np.cos(2.0 * np.pi * unif[:, 1])


def psd_sqrt(M):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return U * np.sqrt(np.clip(w, 0.0, None))


def gaussian(seed, run, stream, steps, cov):
    """Draws with covariance ``cov``, shape ``(steps, dim)``."""
    cov = np.atleast_2d(cov)
    return standard_normals(seed, run, stream, steps, cov.shape[0]) @ psd_sqrt(cov).T
