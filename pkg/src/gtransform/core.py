"""The General Transform: a trainable affine blend of component kernels.

For an ordered list of ``m + 1`` transforms ``F_1..F_{m+1}`` and weights
``p_1..p_m`` the blended kernel is

    B(p) = sum_i p_i F_i + (1 - sum_i p_i) F_{m+1}

and the real output mixes the complex result ``Y = B(p) x`` with the
scalar ``p3``::

    out = p3 * Re(Y) + (1 - p3) * Im(Y)

Weights are unconstrained reals. All forward functions accept leading
batch axes; gradients with respect to the parameters are summed over them.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, EmptyTransformList, StaleCache
from .kernels import TransformKind, build_kernel

VISION_TRANSFORMS = (TransformKind.DCT2, TransformKind.DFT, TransformKind.HAAR)
NLP_TRANSFORMS = (TransformKind.DFT, TransformKind.DLT, TransformKind.IDENTITY)


@dataclass(frozen=True)
class GTParams:
    transforms: tuple
    weights: tuple
    mixer: float = 1.0

    def __post_init__(self):
        kinds = tuple(TransformKind.parse(t) for t in self.transforms)
        if len(kinds) < 2:
            raise EmptyTransformList("a general transform needs at least two component transforms")
        weights = tuple(float(w) for w in np.atleast_1d(np.asarray(self.weights, dtype=float)))
        if len(weights) != len(kinds) - 1:
            raise ConfigError(f"{len(kinds)} transforms need {len(kinds) - 1} weights, got {len(weights)}")
        object.__setattr__(self, "transforms", kinds)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "mixer", float(self.mixer))

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def coefficients(self) -> np.ndarray:
        """Weights of every component, residual weight last."""
        w = np.asarray(self.weights)
        return np.append(w, 1.0 - w.sum())

    def as_vector(self) -> np.ndarray:
        """Flat ``(p_1, ..., p_m, p3)`` for optimisers."""
        return np.append(np.asarray(self.weights), self.mixer)

    def with_vector(self, v) -> "GTParams":
        v = np.asarray(v, dtype=float)
        return GTParams(self.transforms, tuple(v[:-1]), float(v[-1]))

    def replace(self, weights=None, mixer=None) -> "GTParams":
        return GTParams(self.transforms,
                        self.weights if weights is None else weights,
                        self.mixer if mixer is None else mixer)


@dataclass(frozen=True, eq=False)
class BlendedKernel:
    params: GTParams
    size: int
    entries: np.ndarray
    components: tuple = field(repr=False)

    def derivative(self, i: int) -> np.ndarray:
        """dB/dp_i, which does not depend on p."""
        return self.components[i] - self.components[-1]

    def real_map(self) -> np.ndarray:
        p3 = self.params.mixer
        return p3 * self.entries.real + (1.0 - p3) * self.entries.imag


def make_vision_params(weights=(1.0, 0.0), mixer=1.0) -> GTParams:
    return GTParams(VISION_TRANSFORMS, weights, mixer)


def make_nlp_params(weights=(1.0, 0.0), mixer=1.0) -> GTParams:
    return GTParams(NLP_TRANSFORMS, weights, mixer)


def blend_kernel(params: GTParams, n: int) -> BlendedKernel:
    comps = tuple(build_kernel(kind, n).entries for kind in params.transforms)
    coef = params.coefficients
    b = np.zeros((n, n), dtype=complex)
    for c, f in zip(coef, comps):
        if c != 0.0:
            b += c * f
    # exact corner recovery: a single active component is returned untouched
    active = np.flatnonzero(coef != 0.0)
    if len(active) == 1 and coef[active[0]] == 1.0:
        b = comps[active[0]].copy()
    b.setflags(write=False)
    return BlendedKernel(params, n, b, comps)


def mix(y: np.ndarray, mixer: float) -> np.ndarray:
    if mixer == 1.0:
        return y.real.copy()
    return mixer * y.real + (1.0 - mixer) * y.imag


def _check_last(x, n, what="input"):
    if x.shape[-1] != n:
        raise DimensionMismatch(f"{what} has trailing length {x.shape[-1]}, expected {n}")


def gt_forward_1d(params: GTParams, x, kernel: BlendedKernel | None = None):
    """Apply the transform along the last axis; returns ``(out, Y)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim < 1:
        raise DimensionMismatch("input must be at least one-dimensional")
    n = x.shape[-1]
    b = kernel if kernel is not None else blend_kernel(params, n)
    _check_last(x, b.size)
    y = x @ b.entries.T
    return mix(y, params.mixer), y


def gt_forward_2d(params: GTParams, X, kernels: tuple | None = None):
    """``Y = B_R X B_C^T`` over the last two axes, mixed once at the end."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2:
        raise DimensionMismatch("input must be at least two-dimensional")
    r, c = X.shape[-2:]
    br, bc = kernels if kernels is not None else (blend_kernel(params, r), blend_kernel(params, c))
    if br.size != r or bc.size != c:
        raise DimensionMismatch(f"kernels {br.size}x{bc.size} do not fit input {r}x{c}")
    y = br.entries @ X @ bc.entries.T
    return mix(y, params.mixer), y


def forward(params: GTParams, x, ndim: int = 1):
    return gt_forward_1d(params, x)[0] if ndim == 1 else gt_forward_2d(params, x)[0]


def _inner(a, b) -> float:
    return float(np.sum(a * b))


def gt_grad_params(params: GTParams, x, upstream, cache, ndim: int | None = None):
    """Gradient of ``<upstream, out>`` with respect to ``(p, p3)``.

    ``ndim`` selects the 1-D or 2-D form; by default it is inferred from
    the cache that the matching forward call produced (2-D when the
    trailing two axes are both transformed).
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(upstream, dtype=float)
    y = np.asarray(cache)
    if y.shape != x.shape or g.shape != x.shape:
        raise StaleCache(f"cache {y.shape} / upstream {g.shape} do not match input {x.shape}")
    if ndim is None:
        ndim = 2 if x.ndim >= 2 else 1
    p3 = params.mixer
    dp = np.zeros(params.m)
    if ndim == 1:
        b = blend_kernel(params, x.shape[-1])
        for i in range(params.m):
            dy = x @ b.derivative(i).T
            dp[i] = _inner(g, mix(dy, p3))
    else:
        r, c = x.shape[-2:]
        br, bc = blend_kernel(params, r), blend_kernel(params, c)
        for i in range(params.m):
            dy = br.derivative(i) @ x @ bc.entries.T + br.entries @ x @ bc.derivative(i).T
            dp[i] = _inner(g, mix(dy, p3))
    dp3 = _inner(g, y.real - y.imag)
    return dp, dp3


def gt_grad_input(params: GTParams, upstream, ndim: int = 1) -> np.ndarray:
    """Jacobian-transpose product of the forward map.

    With ``w = p3 - i (1 - p3)`` the forward map is ``Re(w B x)``, so the
    input gradient is ``Re(w B^T g)`` (and ``Re(w B_R^T G B_C)`` in 2-D).
    """
    g = np.asarray(upstream, dtype=float)
    w = params.mixer - 1j * (1.0 - params.mixer)
    if ndim == 1:
        b = blend_kernel(params, g.shape[-1])
        return (w * (g @ b.entries)).real
    r, c = g.shape[-2:]
    br, bc = blend_kernel(params, r), blend_kernel(params, c)
    return (w * (br.entries.T @ g @ bc.entries)).real


# -- serialisation -------------------------------------------------------------

def _fmt(v: float) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(v))


def params_to_mapping(params: GTParams) -> dict:
    return {
        "transforms": ", ".join(t.value for t in params.transforms),
        "weights": ", ".join(_fmt(w) for w in params.weights),
        "mixer": _fmt(params.mixer),
    }


def params_from_mapping(section: Mapping[str, str]) -> GTParams:
    try:
        transforms = [s.strip() for s in section["transforms"].split(",") if s.strip()]
        weights = [float(s) for s in section["weights"].split(",") if s.strip()]
        mixer = float(section["mixer"])
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"bad number: {exc}") from None
    return GTParams(tuple(transforms), tuple(weights), mixer)


def dump_params(blocks: "GTParams | Mapping[str, GTParams]") -> str:
    """Serialise one or several named parameter blocks to INI-style text."""
    if isinstance(blocks, GTParams):
        blocks = {"gt": blocks}
    cp = configparser.ConfigParser(interpolation=None)
    for name, params in blocks.items():
        cp[name] = params_to_mapping(params)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_params(text: str, skip=()) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    return {name: params_from_mapping(cp[name]) for name in cp.sections() if name not in skip}


def load_params_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return load_params(fh.read())


def learned_vision_params() -> dict:
    """The learned per-channel vision parameters shipped as a fixture."""
    from importlib import resources

    text = resources.files("gtransform.fixtures").joinpath("learned_vision.ini").read_text(encoding="utf-8")
    return load_params(text)


def stack_vectors(params: Sequence[GTParams]) -> np.ndarray:
    return np.concatenate([p.as_vector() for p in params])
