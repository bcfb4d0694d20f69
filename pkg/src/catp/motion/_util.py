import numpy as np


class SingularityError(ValueError):
    """A model was evaluated at a configuration where it is undefined."""


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


def cols(x):
    """Split the last axis into separate components.

    For a 1-D state this yields numpy scalars, which keeps scalar rollouts
    cheap; for batched states it yields views of shape ``x.shape[:-1]``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return tuple(x)
    return tuple(np.moveaxis(x, -1, 0))


_SCALAR_TYPES = (float, int, np.generic)


def pack(*components):
    # isinstance is much cheaper than np.ndim on the scalar hot path
    if all(isinstance(c, _SCALAR_TYPES) or np.ndim(c) == 0 for c in components):
        return np.array(components, dtype=float)
    return np.stack(np.broadcast_arrays(*components), axis=-1).astype(float, copy=False)


def check_positive(cls_name, **values):
    for k, v in values.items():
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"{cls_name}: {k} must be finite and > 0, got {v!r}")
