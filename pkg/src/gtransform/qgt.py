"""Statevector simulation of the quantum general transform.

The transform is a linear combination of unitaries ``U = sum_i p_i U_i``
with positive weights summing to one, realised by preparing an ancilla in
``|chi> = sum_i sqrt(p_i) |i>``, applying ``SELECT = sum_i |i><i| (x) U_i``
and projecting the ancilla back onto ``|chi>``.

Qubit 0 is the most significant bit of a basis index; in a joint
ancilla-system register the ancilla occupies the high bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidSpec,
    MixedDimensions,
    PostselectionImpossible,
    TooManyUnitaries,
    UnknownId,
    ZeroVector,
)

POSTSELECT_FLOOR = 1e-14

# -- gates ---------------------------------------------------------------------

_S2 = 1.0 / math.sqrt(2.0)
GATES = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "t": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def phase(theta):
    return np.diag([1.0, np.exp(1j * theta)])


def cphase(theta):
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * theta)])


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rot(phi, theta, omega):
    return rz(omega) @ ry(theta) @ rz(phi)


def apply_gate(state: np.ndarray, gate: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a ``k``-qubit gate to ``state`` of shape ``(2**n, ...)``."""
    qubits = list(qubits)
    k = len(qubits)
    rest = state.shape[1:]
    psi = state.reshape((2,) * n + (-1,))
    g = gate.reshape((2,) * (2 * k))
    psi = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), qubits))
    psi = np.moveaxis(psi, list(range(k)), qubits)
    return psi.reshape((2**n,) + rest)


def _gate_matrix(op) -> tuple:
    name, *rest = op
    name = name.lower()
    if name in ("phase", "cphase", "rz", "ry"):
        *qubits, theta = rest
        fn = {"phase": phase, "cphase": cphase, "rz": rz, "ry": ry}[name]
        return fn(theta), qubits
    if name == "rot":
        q, a, b, c = rest
        return rot(a, b, c), [q]
    if name not in GATES:
        raise InvalidSpec(f"unknown gate {name!r}")
    return GATES[name], list(rest)


def run_circuit(ops, n: int, state: np.ndarray | None = None) -> np.ndarray:
    """Apply a gate list to ``state`` (default: all basis columns)."""
    out = np.eye(2**n, dtype=complex) if state is None else np.asarray(state, dtype=complex)
    for op in ops:
        g, qubits = _gate_matrix(op)
        if any(not 0 <= q < n for q in qubits) or len(set(qubits)) != len(qubits):
            raise InvalidSpec(f"gate {op!r} addresses invalid qubits for a {n}-qubit register")
        out = apply_gate(out, g, qubits, n)
    return out


# -- unitary menu --------------------------------------------------------------

CLIFFORD_T_3Q = (
    ("h", 0), ("t", 0), ("cnot", 0, 1), ("h", 1), ("s", 1), ("cnot", 1, 2),
    ("t", 2), ("h", 2), ("cnot", 2, 0), ("s", 0), ("t", 1), ("h", 0),
)


@dataclass(frozen=True)
class UnitarySpec:
    variant: str
    num_qubits: int
    gates: tuple = ()
    angles: tuple = ()
    layers: int = 0

    def circuit(self) -> list:
        n, v = self.num_qubits, self.variant.lower()
        if n < 1:
            raise InvalidSpec("need at least one qubit")
        if v == "qft":
            return qft_circuit(n)
        if v in ("clifford+t", "cliffordt", "clifford_t"):
            for op in self.gates:
                if op[0].lower() not in ("h", "s", "t", "cnot"):
                    raise InvalidSpec(f"Clifford+T circuits only use h, s, t, cnot; got {op[0]!r}")
            return list(self.gates)
        if v == "iqp":
            return iqp_circuit(n, self.angles)
        if v == "qnn":
            a = np.asarray(self.angles, dtype=float)
            if self.layers < 1 or a.size != self.layers * n * 3:
                raise InvalidSpec(f"QNN needs {self.layers} x {n} x 3 angles, got {a.size}")
            return qnn_circuit(n, self.layers, a.reshape(self.layers, n, 3))
        raise InvalidSpec(f"unknown unitary variant {self.variant!r}")


def qft_circuit(n: int) -> list:
    ops = []
    for j in range(n):
        ops.append(("h", j))
        for k in range(j + 1, n):
            # controlled R_m with m = k - j + 1, i.e. phase 2 pi / 2**m
            ops.append(("cphase", k, j, 2 * math.pi / 2 ** (k - j + 1)))
    for j in range(n // 2):
        ops.append(("swap", j, n - 1 - j))
    return ops


def iqp_pairs(n: int) -> list:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def iqp_circuit(n: int, angles) -> list:
    """``H^n . D . H^n`` with ``D`` built from single-qubit phases
    (first ``n`` angles) and pairwise controlled phases (remaining angles,
    pairs in lexicographic order)."""
    pairs = iqp_pairs(n)
    angles = tuple(angles) if len(angles) else (0.0,) * (n + len(pairs))
    if len(angles) != n + len(pairs):
        raise InvalidSpec(f"IQP on {n} qubits needs {n + len(pairs)} angles, got {len(angles)}")
    ops = [("h", q) for q in range(n)]
    ops += [("phase", q, angles[q]) for q in range(n)]
    ops += [("cphase", a, b, angles[n + i]) for i, (a, b) in enumerate(pairs)]
    ops += [("h", q) for q in range(n)]
    return ops


def qnn_circuit(n: int, layers: int, angles) -> list:
    """Strongly-entangling layers: ``Rot`` on each qubit, then a CNOT ring."""
    a = np.asarray(angles, dtype=float)
    if layers < 1 or a.shape != (layers, n, 3):
        raise InvalidSpec(f"QNN needs angles of shape ({layers}, {n}, 3), got {a.shape}")
    ops = []
    for layer in range(layers):
        ops += [("rot", q, *a[layer, q]) for q in range(n)]
        if n > 1:
            ops += [("cnot", q, (q + 1) % n) for q in range(n if n > 2 else 1)]
    return ops


def build_unitary(spec: UnitarySpec) -> np.ndarray:
    return run_circuit(spec.circuit(), spec.num_qubits)


def qft_matrix(n: int) -> np.ndarray:
    d = 2**n
    k = np.arange(d)
    return np.exp(2j * np.pi * (np.outer(k, k) % d) / d) / math.sqrt(d)


def qft_spec(n: int) -> UnitarySpec:
    return UnitarySpec("qft", n)


def clifford_t_spec(n: int = 3, gates=None) -> UnitarySpec:
    if gates is None:
        if n != 3:
            raise InvalidSpec("the default Clifford+T sequence is defined for 3 qubits")
        gates = CLIFFORD_T_3Q
    return UnitarySpec("clifford+t", n, gates=tuple(tuple(g) for g in gates))


def iqp_spec(n: int, angles=None, seed: int = 11) -> UnitarySpec:
    if angles is None:
        angles = np.random.default_rng(seed).uniform(0, 2 * math.pi, n + len(iqp_pairs(n)))
    return UnitarySpec("iqp", n, angles=tuple(float(a) for a in angles))


def qnn_spec(n: int, layers: int = 5, angles=None, seed: int = 13) -> UnitarySpec:
    if angles is None:
        angles = np.random.default_rng(seed).uniform(0, 2 * math.pi, (layers, n, 3))
    return UnitarySpec("qnn", n, angles=tuple(map(tuple, np.asarray(angles).reshape(layers * n, 3))),
                       layers=layers)


# -- states and the LCU --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        d = a.shape[0]
        if a.ndim != 1 or d & (d - 1):
            raise DimensionMismatch(f"state length must be a power of two, got {a.shape}")
        object.__setattr__(self, "amplitudes", a)

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def fidelity(a: QState, b: QState) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def amplitude_encode(x):
    x = np.asarray(x, dtype=float)
    d = x.shape[0] if x.ndim == 1 else 0
    if d == 0 or d & (d - 1):
        raise DimensionMismatch(f"amplitude encoding needs a power-of-two length vector, got {x.shape}")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ZeroVector("cannot amplitude-encode the zero vector")
    return QState(x / norm), norm


def _softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass(eq=False)
class LCUConfig:
    unitaries: list
    raw_logits: np.ndarray
    matrices: list = field(default=None, repr=False)

    def __post_init__(self):
        self.raw_logits = np.asarray(self.raw_logits, dtype=float)
        if len(self.unitaries) == 0 or self.raw_logits.shape != (len(self.unitaries),):
            raise InvalidSpec("need one raw logit per unitary and at least one unitary")
        if self.matrices is None:
            dims = {u.num_qubits for u in self.unitaries}
            if len(dims) != 1:
                raise MixedDimensions(f"unitaries act on different qubit counts: {sorted(dims)}")
            self.matrices = [build_unitary(u) for u in self.unitaries]

    @classmethod
    def from_weights(cls, unitaries, weights) -> "LCUConfig":
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise InvalidSpec("LCU weights must be strictly positive")
        return cls(list(unitaries), np.log(w / w.sum()))

    @classmethod
    def from_matrices(cls, matrices, weights, labels=None) -> "LCUConfig":
        """Wrap explicit unitary matrices (used for random equivalence checks)."""
        mats = [np.asarray(m, dtype=complex) for m in matrices]
        dims = {m.shape for m in mats}
        if len(dims) != 1:
            raise MixedDimensions(f"unitaries have different shapes: {sorted(dims)}")
        n = mats[0].shape[0].bit_length() - 1
        labels = labels or ["matrix"] * len(mats)
        specs = [UnitarySpec(lbl, n) for lbl in labels]
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise InvalidSpec("LCU weights must be strictly positive")
        return cls(specs, np.log(w / w.sum()), matrices=mats)

    @property
    def weights(self) -> np.ndarray:
        return _softmax(self.raw_logits)

    @property
    def num_qubits(self) -> int:
        return self.matrices[0].shape[0].bit_length() - 1

    def with_logits(self, raw_logits) -> "LCUConfig":
        return LCUConfig(self.unitaries, np.asarray(raw_logits, dtype=float), matrices=self.matrices)


def qgt_matrix(config: LCUConfig) -> np.ndarray:
    """Direct weighted sum of the unitaries."""
    out = np.zeros_like(config.matrices[0])
    for p, u in zip(config.weights, config.matrices):
        out += p * u
    return out


def prepare_state(weights, num_ancilla: int) -> np.ndarray:
    chi = np.zeros(2**num_ancilla, dtype=complex)
    chi[:len(weights)] = np.sqrt(weights)
    return chi


def _lcu_project(config: LCUConfig, psi: np.ndarray, num_ancilla: int | None):
    """Unnormalised ``<chi| SELECT |chi> |psi>`` for a batch ``psi`` (B, d)."""
    m = len(config.matrices)
    a = math.ceil(math.log2(m)) if num_ancilla is None else int(num_ancilla)
    if m > 2**a:
        raise TooManyUnitaries(f"{m} unitaries do not fit in {a} ancilla qubits")
    d = config.matrices[0].shape[0]
    if psi.shape[-1] != d:
        raise DimensionMismatch(f"state has length {psi.shape[-1]}, unitaries act on {d}")
    chi = prepare_state(config.weights, a)
    # joint register, ancilla in the high bits: (B, 2**a, d)
    joint = chi[None, :, None] * psi[:, None, :]
    selected = joint.copy()
    for i, u in enumerate(config.matrices):
        selected[:, i, :] = joint[:, i, :] @ u.T
    return np.einsum("a,bad->bd", chi.conj(), selected)


def lcu_apply(config: LCUConfig, state: QState, num_ancilla: int | None = None):
    """Postselected output state and the postselection success probability."""
    out = _lcu_project(config, state.amplitudes[None, :], num_ancilla)[0]
    prob = float(np.vdot(out, out).real)
    if prob < POSTSELECT_FLOOR:
        raise PostselectionImpossible(f"success probability {prob:.3e} is numerically zero")
    return QState(out / math.sqrt(prob)), prob


EXPERIMENTS = {
    "S1": ("iqp", "qft"),
    "S2": ("iqp", "clifford+t"),
    "S3": ("clifford+t", "qft"),
    "S4": ("clifford+t", "qft", "iqp", "qnn"),
}


def _menu_spec(kind: str, n: int) -> UnitarySpec:
    return {"qft": qft_spec, "clifford+t": clifford_t_spec, "iqp": iqp_spec, "qnn": qnn_spec}[kind](n)


def build_experiment_config(exp_id: str, num_qubits: int = 3) -> LCUConfig:
    key = str(exp_id).upper().replace("-", "")
    if key not in EXPERIMENTS:
        raise UnknownId(f"unknown experiment {exp_id!r}; choose from {', '.join(EXPERIMENTS)}")
    kinds = EXPERIMENTS[key]
    return LCUConfig([_menu_spec(k, num_qubits) for k in kinds], np.zeros(len(kinds)))


# -- classical read-out and its gradient ---------------------------------------


def qgt_features_batch(X, config: LCUConfig, num_ancilla: int | None = None):
    """Features ``Re(postselected amplitudes) * ||x||`` for each row of ``X``.

    Returns ``(features, success_prob, cache)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ZeroVector("cannot amplitude-encode the zero vector")
    psi = X / norms[:, None]
    z = _lcu_project(config, psi.astype(complex), num_ancilla)
    prob = np.einsum("bd,bd->b", z.conj(), z).real
    if np.any(prob < POSTSELECT_FLOOR):
        raise PostselectionImpossible("a sample has numerically zero success probability")
    nz = np.sqrt(prob)
    feats = norms[:, None] * z.real / nz[:, None]
    return feats, prob, (psi, norms, z, nz)


def qgt_feature_map(x, config: LCUConfig):
    feats, prob, _ = qgt_features_batch(np.asarray(x, dtype=float)[None, :], config)
    return feats[0], float(prob[0])


def qgt_grad_logits(config: LCUConfig, upstream, cache) -> np.ndarray:
    """Gradient of ``sum(upstream * features)`` w.r.t. the raw logits."""
    psi, norms, z, nz = cache
    g = np.atleast_2d(upstream)
    gz = np.einsum("bd,bd->b", g, z.real)
    dp = np.empty(len(config.matrices))
    for i, u in enumerate(config.matrices):
        v = psi.astype(complex) @ u.T
        dnorm = np.einsum("bd,bd->b", z.conj(), v).real / nz
        term = np.einsum("bd,bd->b", g, v.real) / nz - gz * dnorm / nz**2
        dp[i] = float(np.sum(norms * term))
    p = config.weights
    return p * (dp - np.dot(p, dp))


# -- toy trainability ----------------------------------------------------------


@dataclass
class QGTTrainResult:
    losses: list
    weights: list
    config: LCUConfig
    head: dict


def train_qgt_weights(config: LCUConfig, X, labels, steps: int = 50, lr: float = 0.5,
                      momentum: float = 0.5, probe: int = 1, train_head: bool = True,
                      head: dict | None = None) -> QGTTrainResult:
    """Full-batch training of the LCU logits (and an affine head on one
    probed feature) under cross-entropy.

    ``losses[t]`` is the loss before update ``t``; ``losses[steps]`` the
    final one. ``weights`` holds the simplex weights after every update.
    """
    from .train import SGD, cross_entropy, sgd_step

    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    params = {"logits": config.raw_logits.copy()}
    params.update(head or {"head.w": np.zeros((1, 2)), "head.b": np.zeros(2)})
    opt = SGD(momentum=momentum, weight_decay=0.0)
    state = None
    losses, weights = [], []

    def loss_grad(p):
        cfg = config.with_logits(p["logits"])
        feats, _, cache = qgt_features_batch(X, cfg)
        f = feats[:, probe:probe + 1]
        loss, dl = cross_entropy(f @ p["head.w"] + p["head.b"], labels)
        up = np.zeros_like(feats)
        up[:, probe:probe + 1] = dl @ p["head.w"].T
        grads = {"logits": qgt_grad_logits(cfg, up, cache)}
        if train_head:
            grads["head.w"], grads["head.b"] = f.T @ dl, dl.sum(axis=0)
        else:
            grads["head.w"], grads["head.b"] = np.zeros_like(p["head.w"]), np.zeros_like(p["head.b"])
        return loss, grads

    for _ in range(steps):
        loss, grads = loss_grad(params)
        losses.append(loss)
        params, state = sgd_step(params, grads, state, opt, lr=lr)
        weights.append(_softmax(params["logits"]))
    losses.append(loss_grad(params)[0])
    head_out = {k: v for k, v in params.items() if k != "logits"}
    return QGTTrainResult(losses, weights, config.with_logits(params["logits"]), head_out)
