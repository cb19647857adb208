"""Link functions mapping learner outputs to PMFs, with vector-Jacobian products.

All functions operate on the last axis and accept a single vector or a batch
``(n, D)``.  Gradients are provided as vector-Jacobian products (``*_vjp``):
given an upstream gradient on the link output they return the gradient on the
link input.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ordino.errors import NumericError, ParameterError, PreconditionError

LINKS = ("SL", "VSL", "CL", "POCL", "POVSL", "MAUL")
RHO_KINDS = ("exp", "square", "softplus")
TAU_KINDS = ("abs", "square")

#: probability floor applied before any logarithm
PROB_FLOOR = 1e-12
# ρ-inverse of a zero increment is -inf for exp/softplus; substitute this
_INVERSE_FLOOR = -700.0
# exp increments saturate every downstream probability long before this; the
# cap keeps squared V-shaped inputs finite (gradient is zero beyond it)
EXP_CAP = 50.0


def _check_finite(u: np.ndarray) -> None:
    if not np.all(np.isfinite(u)):
        raise NumericError("link input contains non-finite entries")


# --- elementwise transforms -------------------------------------------------

def rho(u, kind: str = "exp") -> np.ndarray:
    """Nonnegative increment function used to build ordered vectors."""
    u = np.asarray(u, dtype=float)
    if kind == "exp":
        return np.exp(np.minimum(u, EXP_CAP))
    if kind == "square":
        return u * u
    if kind == "softplus":
        return np.logaddexp(0.0, u)
    raise ValueError(f"unknown rho kind {kind!r}")


def rho_grad(u, kind: str = "exp") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if kind == "exp":
        return np.where(u < EXP_CAP, np.exp(np.minimum(u, EXP_CAP)), 0.0)
    if kind == "square":
        return 2.0 * u
    if kind == "softplus":
        return expit(u)
    raise ValueError(f"unknown rho kind {kind!r}")


def rho_inverse(v, kind: str = "exp") -> np.ndarray:
    """A right inverse of :func:`rho` on ``[0, inf)``; zero maps to a finite floor."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        if kind == "exp":
            out = np.log(v)
        elif kind == "square":
            return np.sqrt(np.maximum(v, 0.0))
        elif kind == "softplus":
            out = np.log(np.expm1(v))
        else:
            raise ValueError(f"unknown rho kind {kind!r}")
    return np.where(v > 0, out, _INVERSE_FLOOR)


def tau(u, kind: str = "square") -> np.ndarray:
    """V-shaped transform."""
    u = np.asarray(u, dtype=float)
    if kind == "square":
        return u * u
    if kind == "abs":
        return np.abs(u)
    raise ValueError(f"unknown tau kind {kind!r}")


def tau_grad(u, kind: str = "square") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if kind == "square":
        return 2.0 * u
    if kind == "abs":
        return np.sign(u)
    raise ValueError(f"unknown tau kind {kind!r}")


# --- SL ---------------------------------------------------------------------

def sl_link(u) -> np.ndarray:
    """Softmax of the negated inputs: ``p_y ∝ exp(-u_y)``."""
    u = np.asarray(u, dtype=float)
    _check_finite(u)
    z = -u
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sl_vjp(p: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the SL input given the SL output ``p`` and upstream ``G``."""
    return -p * (G - np.sum(G * p, axis=-1, keepdims=True))


# --- ordered / V-shaped -----------------------------------------------------

def ordered_transform(g, kind: str = "exp") -> np.ndarray:
    """Cumulative construction ``a_1 = g_1, a_k = a_{k-1} + rho(g_k)``; nondecreasing."""
    g = np.asarray(g, dtype=float)
    inc = rho(g, kind)
    inc[..., 0] = g[..., 0]
    return np.cumsum(inc, axis=-1)


def ordered_vjp(g: np.ndarray, G: np.ndarray, kind: str = "exp") -> np.ndarray:
    tail = np.cumsum(G[..., ::-1], axis=-1)[..., ::-1]
    out = rho_grad(g, kind) * tail
    out[..., 0] = tail[..., 0]
    return out


def ordered_inverse(a, kind: str = "exp") -> np.ndarray:
    """Recover ``g`` from a nondecreasing ``a`` (zero increments hit the floor)."""
    a = np.asarray(a, dtype=float)
    g = np.empty_like(a)
    g[..., 0] = a[..., 0]
    g[..., 1:] = rho_inverse(np.diff(a, axis=-1), kind)
    return g


# --- VSL --------------------------------------------------------------------

def vsl_link(u, rho_kind: str = "exp", tau_kind: str = "square") -> np.ndarray:
    """SL applied to ``tau(ordered_transform(u))``; always unimodal."""
    u = np.asarray(u, dtype=float)
    _check_finite(u)
    return sl_link(tau(ordered_transform(u, rho_kind), tau_kind))


def _vsl_forward(u, rho_kind, tau_kind):
    a = ordered_transform(u, rho_kind)
    p = sl_link(tau(a, tau_kind))
    return p, a


def vsl_vjp(u, G, rho_kind: str = "exp", tau_kind: str = "square") -> np.ndarray:
    p, a = _vsl_forward(u, rho_kind, tau_kind)
    return ordered_vjp(u, tau_grad(a, tau_kind) * sl_vjp(p, G), rho_kind)


def vsl_inverse(p, rho_kind: str = "exp", tau_kind: str = "square") -> np.ndarray:
    """Constructive VSL input reproducing a strictly positive unimodal ``p``.

    With ``v = -log p`` the ordered vector is ``-tau^{-1}(v_k)`` up to the
    mode and ``+tau^{-1}(v_k)`` after it.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise PreconditionError("constructive inverse needs strictly positive probabilities")
    v = -np.log(p)
    if tau_kind == "square":
        w = np.sqrt(v)
    elif tau_kind == "abs":
        w = v
    else:
        raise ValueError(f"unknown tau kind {tau_kind!r}")
    mode = np.argmax(p, axis=-1)
    idx = np.arange(p.shape[-1])
    before = idx <= (mode[..., None] if p.ndim > 1 else mode)
    a = np.where(before, -w, w)
    return ordered_inverse(a, rho_kind)


# --- CL ---------------------------------------------------------------------

def cl_link(u, clamp: bool = True) -> np.ndarray:
    """Cumulative-logit link on a nondecreasing vector of ``K-1`` thresholds."""
    u = np.asarray(u, dtype=float)
    _check_finite(u)
    if np.any(np.diff(u, axis=-1) < -1e-9):
        raise PreconditionError("CL link inputs must be nondecreasing")
    p = _cl_raw(u)
    return clamp_probs(p) if clamp else p


def _cl_raw(u: np.ndarray) -> np.ndarray:
    shape = u.shape[:-1] + (u.shape[-1] + 1,)
    p = np.empty(shape)
    lo, hi = u[..., :-1], u[..., 1:]
    p[..., 0] = expit(u[..., 0])
    # sigma(hi) - sigma(lo) without cancellation for close thresholds
    p[..., 1:-1] = expit(hi) * expit(-lo) * -np.expm1(lo - hi)
    p[..., -1] = expit(-u[..., -1])
    return np.maximum(p, 0.0)


def cl_vjp(u, G) -> np.ndarray:
    s = expit(u)
    return s * (1.0 - s) * (G[..., :-1] - G[..., 1:])


# --- proportional odds ------------------------------------------------------

def po_inputs(a, b, rho_kind: str = "exp") -> np.ndarray:
    """Ordered biases minus a shared scalar score: ``(ordered(b)_k - a)_k``.

    ``a`` may be a scalar or a length-n vector; the result has shape
    ``(n, len(b))`` for vector ``a``.
    """
    a = np.asarray(a, dtype=float)
    b_ord = ordered_transform(np.asarray(b, dtype=float), rho_kind)
    return b_ord - a[..., None] if a.ndim else b_ord - a


# --- clamping ---------------------------------------------------------------

def clamp_probs(p, floor: float = PROB_FLOOR) -> np.ndarray:
    """Floor probabilities at ``floor`` and renormalize."""
    c = np.maximum(p, floor)
    return c / c.sum(axis=-1, keepdims=True)


def clamp_vjp(p, G, floor: float = PROB_FLOOR) -> np.ndarray:
    c = np.maximum(p, floor)
    s = c.sum(axis=-1, keepdims=True)
    q = c / s
    dc = (G - np.sum(G * q, axis=-1, keepdims=True)) / s
    return np.where(p > floor, dc, 0.0)


# --- model-level dispatch ---------------------------------------------------

@dataclass(frozen=True)
class LikelihoodSpec:
    """Declarative description of a likelihood model.

    ``MAUL`` mixes an inner VSL link (weight ``1 - mixture_rate``) with an SL
    link (weight ``mixture_rate``).
    """

    link: str
    K: int
    rho: str = "exp"
    tau: str = "square"
    mixture_rate: float = 0.0

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}; expected one of {LINKS}")
        if self.K < 3:
            raise ValueError("K must be at least 3")
        if self.rho not in RHO_KINDS:
            raise ValueError(f"unknown rho kind {self.rho!r}")
        if self.tau not in TAU_KINDS:
            raise ValueError(f"unknown tau kind {self.tau!r}")
        if not 0.0 <= self.mixture_rate <= 1.0:
            raise ParameterError(f"mixture rate must lie in [0, 1], got {self.mixture_rate}")

    @property
    def head_dim(self) -> int:
        """Number of network outputs feeding the link."""
        return {"SL": self.K, "VSL": self.K, "CL": self.K - 1,
                "POCL": 1, "POVSL": 1, "MAUL": 2 * self.K}[self.link]

    @property
    def bias_dim(self) -> int:
        """Length of the free threshold vector ``b`` of PO models (0 otherwise)."""
        return {"POCL": self.K - 1, "POVSL": self.K}.get(self.link, 0)

    def with_rate(self, r: float) -> "LikelihoodSpec":
        return LikelihoodSpec(self.link, self.K, self.rho, self.tau, float(r))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LikelihoodSpec":
        return cls(**d)


def maul_link(u1, u2, spec: LikelihoodSpec) -> np.ndarray:
    """``(1 - r) * vsl_link(u1) + r * sl_link(u2)``."""
    r = spec.mixture_rate
    if not 0.0 <= r <= 1.0:
        raise ParameterError(f"mixture rate must lie in [0, 1], got {r}")
    return (1.0 - r) * vsl_link(u1, spec.rho, spec.tau) + r * sl_link(u2)


def nest_mixture_inputs(u1, u2, r1: float, r2: float, spec: LikelihoodSpec) -> np.ndarray:
    """SL input ``u2'`` such that rate ``r2`` with ``(u1, u2')`` equals rate ``r1`` with ``(u1, u2)``."""
    if not 0.0 <= r1 <= r2 <= 1.0 or r2 == 0.0:
        raise ParameterError("need 0 <= r1 <= r2 <= 1 and r2 > 0")
    q = ((r2 - r1) * vsl_link(u1, spec.rho, spec.tau) + r1 * sl_link(u2)) / r2
    return -np.log(q)


def link_probs(spec: LikelihoodSpec, z, b=None) -> np.ndarray:
    """Raw (unclamped) link output for network outputs ``z`` of shape ``(n, head_dim)``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    _check_finite(z)
    K = spec.K
    if spec.link == "SL":
        return sl_link(z)
    if spec.link == "VSL":
        return vsl_link(z, spec.rho, spec.tau)
    if spec.link == "CL":
        return _cl_raw(ordered_transform(z, spec.rho))
    if spec.link == "POCL":
        return _cl_raw(po_inputs(z[:, 0], b, spec.rho))
    if spec.link == "POVSL":
        return sl_link(tau(po_inputs(z[:, 0], b, spec.rho), spec.tau))
    return maul_link(z[:, :K], z[:, K:], spec)


def link_vjp(spec: LikelihoodSpec, z, b, G):
    """Gradient of ``sum(G * link_probs(spec, z, b))`` w.r.t. ``z`` and ``b``.

    Returns ``(dz, db)`` where ``db`` is ``None`` for models without a free
    threshold vector.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    K = spec.K
    if spec.link == "SL":
        return sl_vjp(sl_link(z), G), None
    if spec.link == "VSL":
        return vsl_vjp(z, G, spec.rho, spec.tau), None
    if spec.link == "CL":
        a = ordered_transform(z, spec.rho)
        return ordered_vjp(z, cl_vjp(a, G), spec.rho), None
    if spec.link in ("POCL", "POVSL"):
        b = np.asarray(b, dtype=float)
        w = po_inputs(z[:, 0], b, spec.rho)
        if spec.link == "POCL":
            dw = cl_vjp(w, G)
        else:
            dw = tau_grad(w, spec.tau) * sl_vjp(sl_link(tau(w, spec.tau)), G)
        dz = -dw.sum(axis=1, keepdims=True)
        db = ordered_vjp(b, dw.sum(axis=0), spec.rho)
        return dz, db
    r = spec.mixture_rate
    dz = np.empty_like(z)
    dz[:, :K] = (1.0 - r) * vsl_vjp(z[:, :K], G, spec.rho, spec.tau)
    dz[:, K:] = r * sl_vjp(sl_link(z[:, K:]), G)
    return dz, None


def log_prob(spec: LikelihoodSpec, z, y, b=None) -> np.ndarray:
    """Per-sample ``log P(y)`` with clamped probabilities; ``y`` holds 1-based labels."""
    y = np.asarray(y, dtype=int)
    P = clamp_probs(link_probs(spec, z, b))
    return np.log(P[np.arange(P.shape[0]), y - 1])


def log_prob_grad(spec: LikelihoodSpec, z, y, b=None):
    """Gradient of ``sum_i log P(y_i; z_i)`` w.r.t. ``z`` (and ``b`` for PO models)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    P = link_probs(spec, z, b)
    Pc = clamp_probs(P)
    rows = np.arange(P.shape[0])
    Gc = np.zeros_like(P)
    Gc[rows, y - 1] = 1.0 / Pc[rows, y - 1]
    return link_vjp(spec, z, b, clamp_vjp(P, Gc))
