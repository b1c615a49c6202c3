"""Feature-logit policy with an insertable residual adapter.

logit(a) = -theta . f(s, a) / temperature + w2 . tanh(W1 f(s, a) + b1) + b2

The base weights ``theta`` are pre-trained; the adapter (W1, b1, w2, b2) is the
small parameter set fine-tuned per instance.  All gradients are written out by
hand and checked against central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problems import State

FD_STEP = 1e-5
FD_FLOOR = 1e-8


class Divergence(RuntimeError):
    """Parameters became non-finite during an update."""


@dataclass
class PolicyParams:
    theta: np.ndarray
    temperature: float = 0.1

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def initial(cls, n_features: int, temperature: float = 0.1) -> "PolicyParams":
        """Softened nearest-neighbour policy: weight 1 on the first feature."""
        theta = np.zeros(n_features)
        theta[0] = 1.0
        return cls(theta, temperature)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.theta.copy(), self.temperature)


@dataclass
class EasParams:
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float = 0.0
    version: int = field(default=0, compare=False)

    @classmethod
    def insert(cls, n_features: int, hidden: int = 8, seed=0) -> "EasParams":
        """Fresh adapter whose output is exactly zero (w2 = 0, b2 = 0)."""
        rng = np.random.default_rng(seed)
        W1 = rng.normal(0.0, 1.0 / np.sqrt(n_features), size=(hidden, n_features))
        b1 = rng.normal(0.0, 0.1, size=hidden)
        return cls(W1, b1, np.zeros(hidden), 0.0)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def with_vector(self, v: np.ndarray) -> "EasParams":
        h, f = self.W1.shape
        v = np.asarray(v)
        i = h * f
        return EasParams(
            v[:i].reshape(h, f), v[i : i + h], v[i + h : i + 2 * h], v[-1], self.version
        )

    def zeros_like(self) -> "EasParams":
        return self.with_vector(np.zeros(self.vector().shape))

    def copy(self) -> "EasParams":
        return self.with_vector(self.vector().copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector()))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.vector()).all())


@dataclass
class ActionDistribution:
    actions: list[int]
    probs: np.ndarray
    logits: np.ndarray


class Policy:
    """Base parameters plus an optional adapter, applied to batched features."""

    def __init__(self, params: PolicyParams, eas: EasParams | None = None):
        self.params = params
        self.eas = eas

    def logits(self, feats: np.ndarray, mask: np.ndarray) -> np.ndarray:
        z, _ = forward(feats, self.params, self.eas)
        return np.where(mask, z, -np.inf)

    def log_probs(self, feats: np.ndarray, mask: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            z, _ = forward(feats, self.params, self.eas)
        if not np.isfinite(z[mask]).all():
            raise Divergence("policy produced non-finite logits")
        return log_softmax(np.where(mask, z, -np.inf))


def forward(feats, params: PolicyParams, eas: EasParams | None):
    """Unmasked logits (..., A) and the adapter's hidden activations."""
    theta = np.asarray(params.theta, dtype=feats.dtype)
    z = -(feats @ theta) / feats.dtype.type(params.temperature)
    h = None
    if eas is not None:
        W1 = np.asarray(eas.W1, dtype=feats.dtype)
        h = np.tanh(feats @ W1.T + np.asarray(eas.b1, dtype=feats.dtype))
        z = z + h @ np.asarray(eas.w2, dtype=feats.dtype) + feats.dtype.type(eas.b2)
    return z, h


def log_softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax; -inf entries stay -inf."""
    m = z.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0)
    shifted = z - m
    with np.errstate(divide="ignore"):
        lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def _masked_logp(feats, mask, params, eas):
    z, h = forward(feats, params, eas)
    z = np.where(mask, z, -np.inf)
    return log_softmax(z), h


def _entropy_from_logp(logp, mask):
    safe = np.where(mask, logp, 0.0)
    return -(np.exp(safe) * safe * mask).sum(axis=-1)


def _backward(feats, h, g, params, eas, wrt):
    """Chain dL/dz (rows, A) into parameter gradients.

    ``g`` must be zero on infeasible actions.
    """
    out = {}
    if "theta" in wrt:
        out["theta"] = -np.einsum("ra,raf->f", g, feats) / params.temperature
    if "psi" in wrt:
        u = g[..., None] * eas.w2 * (1.0 - h**2)  # (rows, A, H)
        out["psi"] = EasParams(
            W1=np.einsum("rah,raf->hf", u, feats),
            b1=u.sum(axis=(0, 1)),
            w2=np.einsum("ra,rah->h", g, h),
            b2=float(g.sum()),
            version=eas.version,
        )
    return out


def _state_inputs(state: State):
    if state.is_terminal:
        raise ValueError("policy is undefined on a terminal state")
    feats = state.env.features()
    mask = state.env.mask()
    if not np.isfinite(feats[mask]).all():
        raise ValueError("non-finite feature value")
    return feats, mask


def eval_policy(params: PolicyParams, eas: EasParams | None, state: State) -> ActionDistribution:
    feats, mask = _state_inputs(state)
    logp, _ = _masked_logp(feats, mask, params, eas)
    z, _ = forward(feats, params, eas)
    acts = np.flatnonzero(mask[0])
    return ActionDistribution([int(a) for a in acts], np.exp(logp[0, acts]), z[0, acts])


def entropy(dist: ActionDistribution) -> float:
    p = dist.probs
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def log_prob(params, eas, state: State, action: int) -> float:
    feats, mask = _state_inputs(state)
    logp, _ = _masked_logp(feats, mask, params, eas)
    if not mask[0, action]:
        raise ValueError(f"action {action} is not feasible")
    return float(logp[0, action])


def _logprob_g(logp, mask, actions):
    p = np.where(mask, np.exp(logp), 0.0)
    g = -p
    g[np.arange(len(actions)), actions] += 1.0
    return g


def _entropy_g(logp, mask):
    p = np.where(mask, np.exp(logp), 0.0)
    safe = np.where(mask, logp, 0.0)
    H = -(p * safe).sum(axis=-1, keepdims=True)
    return -p * (safe + H)


def log_prob_grad(params, eas, state: State, action: int, wrt=("psi",)) -> dict:
    feats, mask = _state_inputs(state)
    if not mask[0, action]:
        raise ValueError(f"action {action} is not feasible")
    logp, h = _masked_logp(feats, mask, params, eas)
    g = _logprob_g(logp, mask, np.array([action]))
    return _backward(feats, h, g, params, eas, wrt)


def log_prob_grad_psi(params, eas, state, action) -> EasParams:
    return log_prob_grad(params, eas, state, action, ("psi",))["psi"]


def log_prob_grad_theta(params, eas, state, action) -> np.ndarray:
    return log_prob_grad(params, eas, state, action, ("theta",))["theta"]


def logit_grad(params, eas, state: State, action: int) -> np.ndarray:
    """d log pi(action) / d logits, over the feasible action list."""
    feats, mask = _state_inputs(state)
    logp, _ = _masked_logp(feats, mask, params, eas)
    g = _logprob_g(logp, mask, np.array([action]))
    return g[0, np.flatnonzero(mask[0])]


def entropy_grad(params, eas, state: State, wrt=("psi",)) -> dict:
    feats, mask = _state_inputs(state)
    logp, h = _masked_logp(feats, mask, params, eas)
    return _backward(feats, h, _entropy_g(logp, mask), params, eas, wrt)


def entropy_grad_psi(params, eas, state) -> EasParams:
    return entropy_grad(params, eas, state, ("psi",))["psi"]


def entropy_grad_theta(params, eas, state) -> np.ndarray:
    return entropy_grad(params, eas, state, ("theta",))["theta"]


# -- trajectory batches -----------------------------------------------------


@dataclass
class StepRecord:
    """Flattened decision steps of a batch of trajectories."""

    feats: np.ndarray  # (R, A, F)
    mask: np.ndarray  # (R, A)
    actions: np.ndarray  # (R,)
    row: np.ndarray  # (R,) trajectory index of each step


def trajectory_grad(
    params: PolicyParams,
    eas: EasParams | None,
    rec: StepRecord,
    weights: np.ndarray,
    entropy_coef: float = 0.0,
    wrt=("psi",),
) -> dict:
    """sum_i weights[i] * sum_d grad log pi(a_d^i) + entropy_coef * sum_i sum_d grad H."""
    logp, h = _masked_logp(rec.feats, rec.mask, params, eas)
    g = _logprob_g(logp, rec.mask, rec.actions) * weights[rec.row][:, None]
    if entropy_coef:
        g = g + entropy_coef * _entropy_g(logp, rec.mask)
    return _backward(rec.feats, h, g, params, eas, wrt)


def trajectory_log_prob(params, eas, rec: StepRecord, n_rows: int) -> np.ndarray:
    logp, _ = _masked_logp(rec.feats, rec.mask, params, eas)
    per_step = logp[np.arange(len(rec.actions)), rec.actions]
    out = np.zeros(n_rows, dtype=per_step.dtype)
    np.add.at(out, rec.row, per_step)
    return out


def mean_entropy(params, eas, rec: StepRecord) -> float:
    logp, _ = _masked_logp(rec.feats, rec.mask, params, eas)
    return float(_entropy_from_logp(logp, rec.mask).mean()) if len(rec.actions) else 0.0


# -- finite differences -----------------------------------------------------


def _rel_err(a, b):
    a = np.asarray(a, dtype=np.longdouble)
    b = np.asarray(b, dtype=np.longdouble)
    den = np.maximum(np.maximum(abs(a), abs(b)), FD_FLOOR)
    return float((abs(a - b) / den).max()) if a.size else 0.0


def finite_diff_check(
    params: PolicyParams,
    eas: EasParams | None,
    state: State,
    which: str = "logprob",
    action: int | None = None,
    wrt=("psi", "theta"),
    step: float = FD_STEP,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    The difference quotients are evaluated in extended precision so that
    round-off stays far below the tolerance even for near-zero components.
    """
    feats, mask = _state_inputs(state)
    if which == "logprob":
        if action is None:
            action = int(np.flatnonzero(mask[0])[0])
        analytic = log_prob_grad(params, eas, state, action, wrt)
    elif which == "entropy":
        analytic = entropy_grad(params, eas, state, wrt)
    else:
        raise ValueError(f"unknown check {which!r}")
    ld = np.longdouble
    fl = feats.astype(ld)

    def objective(p, e):
        logp, _ = _masked_logp(fl, mask, p, e)
        if which == "logprob":
            return logp[0, action]
        return _entropy_from_logp(logp, mask)[0]

    worst = 0.0
    hstep = ld(step)
    if "theta" in wrt:
        base = params.theta.astype(ld)
        num = np.empty(base.shape, dtype=ld)
        for i in range(base.size):
            up, dn = base.copy(), base.copy()
            up[i] += hstep
            dn[i] -= hstep
            num[i] = (
                objective(PolicyParams(up, params.temperature), eas)
                - objective(PolicyParams(dn, params.temperature), eas)
            ) / (2 * hstep)
        worst = max(worst, _rel_err(analytic["theta"], num))
    if "psi" in wrt and eas is not None:
        base = eas.vector().astype(ld)
        num = np.empty(base.shape, dtype=ld)
        for i in range(base.size):
            up, dn = base.copy(), base.copy()
            up[i] += hstep
            dn[i] -= hstep
            num[i] = (objective(params, eas.with_vector(up)) - objective(params, eas.with_vector(dn))) / (
                2 * hstep
            )
        worst = max(worst, _rel_err(analytic["psi"].vector(), num))
    return worst


# -- checkpoints ------------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def format_checkpoint(params: PolicyParams, eas: EasParams | None = None) -> str:
    lines = [
        f"theta [{params.theta.size}] {_fmt(params.theta)}",
        f"temperature [] {_fmt([params.temperature])}",
    ]
    if eas is not None:
        h, f = eas.W1.shape
        lines += [
            f"eas.W1 [{h},{f}] {_fmt(eas.W1)}",
            f"eas.b1 [{h}] {_fmt(eas.b1)}",
            f"eas.w2 [{h}] {_fmt(eas.w2)}",
            f"eas.b2 [] {_fmt([eas.b2])}",
        ]
    return "\n".join(lines) + "\n"


def parse_checkpoint(text: str) -> tuple[PolicyParams, EasParams | None]:
    vals = {}
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            key, shape, *nums = line.split()
            dims = [int(d) for d in shape.strip("[]").split(",") if d]
            arr = np.array([float(x) for x in nums])
        except ValueError:
            raise ValueError(f"line {no}: malformed checkpoint entry") from None
        if arr.size != int(np.prod(dims)):
            raise ValueError(f"line {no}: {key} has {arr.size} values for shape {dims}")
        vals[key] = arr.reshape(dims) if dims else float(arr[0])
    missing = {"theta", "temperature"} - vals.keys()
    if missing:
        raise ValueError(f"checkpoint lacks {sorted(missing)}")
    params = PolicyParams(vals["theta"], vals["temperature"])
    eas = None
    if "eas.W1" in vals:
        eas = EasParams(vals["eas.W1"], vals["eas.b1"], vals["eas.w2"], vals["eas.b2"])
    return params, eas


def save_checkpoint(path, params, eas=None) -> None:
    Path(path).write_text(format_checkpoint(params, eas), encoding="utf-8")


def load_checkpoint(path):
    return parse_checkpoint(Path(path).read_text(encoding="utf-8"))
