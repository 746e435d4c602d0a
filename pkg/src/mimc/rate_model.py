"""Rate assumptions, derived rates and asymptotic work complexity.

The model is the usual triple of per-direction geometric rates

    E_alpha <= Q_W prod beta_i^(-w_i alpha_i)        (weak error)
    V_alpha <= Q_S prod beta_i^(-s_i alpha_i)        (variance)
    W_alpha <= C_work prod beta_i^(gamma_i alpha_i)  (work per sample)

From these we derive the quantities that decide which index set to use and
how the total work scales with the tolerance: level choices for full-tensor
and total-degree sets, the direction classes, and the complexity cases for
MIMC with total-degree sets, MIMC with full-tensor sets and plain MLMC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .simplex_integrals import bias_bound_constant, work_bound_constant

TIE_RTOL = 1e-9


class BoxTooSmallError(ValueError):
    """A truncation box does not capture the set or its tail."""


def _as_vector(value, d: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    if arr.shape != (d,):
        raise ValueError(f"{name} must have length {d}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RateParameters:
    """Rate constants of the weak-error, variance and work models.

    Scalars are broadcast to all ``d`` directions.
    """

    d: int
    beta: np.ndarray
    w: np.ndarray
    s: np.ndarray
    gamma: np.ndarray
    Q_W: float = 1.0
    Q_S: float = 1.0
    C_work: float = 1.0
    h0: Optional[np.ndarray] = None

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise ValueError("d must be >= 1")
        object.__setattr__(self, "d", d)
        for name in ("beta", "w", "s", "gamma"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), d, name))
        if self.h0 is not None:
            object.__setattr__(self, "h0", _as_vector(self.h0, d, "h0"))
        if np.any(self.beta <= 1):
            raise ValueError("beta_i must exceed 1")
        if np.any(self.w <= 0) or np.any(self.gamma <= 0):
            raise ValueError("w_i and gamma_i must be positive")
        if np.any(self.s <= 0) or np.any(self.s > 2 * self.w * (1 + 1e-12)):
            raise ValueError("s_i must lie in (0, 2 w_i]")
        for name in ("Q_W", "Q_S", "C_work"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def isotropic(cls, d, beta, w, s, gamma, **kw) -> "RateParameters":
        return cls(d=d, beta=beta, w=w, s=s, gamma=gamma, **kw)

    @property
    def log_beta(self) -> np.ndarray:
        return np.log(self.beta)

    @property
    def w_bar(self) -> np.ndarray:
        return self.log_beta * self.w

    @property
    def s_bar(self) -> np.ndarray:
        return self.log_beta * self.s

    @property
    def gamma_bar(self) -> np.ndarray:
        return self.log_beta * self.gamma

    @property
    def g_bar(self) -> np.ndarray:
        """Per-direction exponent ``log(beta_i) (gamma_i - s_i) / 2``."""
        return self.log_beta * (self.gamma - self.s) / 2

    def is_isotropic(self) -> bool:
        return all(
            np.allclose(v, v[0], rtol=TIE_RTOL, atol=0)
            for v in (self.beta, self.w, self.s, self.gamma)
        )

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "beta": self.beta.tolist(),
            "w": self.w.tolist(),
            "s": self.s.tolist(),
            "gamma": self.gamma.tolist(),
            "Q_W": self.Q_W,
            "Q_S": self.Q_S,
            "C_work": self.C_work,
        }
        if self.h0 is not None:
            out["h0"] = self.h0.tolist()
        return out


def _argext_count(values: np.ndarray, target: float) -> int:
    return int(np.sum(np.isclose(values, target, rtol=TIE_RTOL, atol=1e-14)))


def _cmp(x: float, y: float) -> int:
    """Three-way compare with relative tie tolerance."""
    if math.isclose(x, y, rel_tol=TIE_RTOL, abs_tol=1e-14):
        return 0
    return -1 if x < y else 1


def tol_split(tol: float, theta: float, eps: float, rates: RateParameters | None = None):
    """Return ``(TOL_S, TOL_B)``; ``TOL_B`` is ``None`` without rates."""
    tol_s = theta * tol / c_epsilon(eps)
    tol_b = None if rates is None else (1 - theta) * tol / rates.Q_W
    return tol_s, tol_b


def c_epsilon(eps: float) -> float:
    """Normal quantile ``C`` with ``Phi(C) = 1 - eps/2``."""
    if not 0 < eps < 1:
        raise ValueError(f"confidence parameter must lie in (0, 1), got {eps}")
    return float(ndtri(1.0 - eps / 2.0))


@dataclass(frozen=True)
class DirectionClasses:
    I1: tuple[int, ...]
    I2: tuple[int, ...]
    I3: tuple[int, ...]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.I1), len(self.I2), len(self.I3)


def classify_directions(rates: RateParameters) -> DirectionClasses:
    """Split directions by variance rate vs work rate (0-based indices).

    ``I1``: ``s_i > gamma_i``, ``I2``: ``s_i = gamma_i``, ``I3``: ``s_i < gamma_i``.
    """
    groups: tuple[list, list, list] = ([], [], [])
    for i in range(rates.d):
        c = _cmp(float(rates.s[i]), float(rates.gamma[i]))
        groups[{1: 0, 0: 1, -1: 2}[c]].append(i)
    return DirectionClasses(*(tuple(g) for g in groups))


@dataclass(frozen=True)
class DerivedRates:
    eta: float
    e_mult: int
    Gamma: float
    g_mult: int
    chi: float
    x_mult: int
    zeta: float
    z_mult: int
    xi: float
    classes: DirectionClasses
    g_bar: np.ndarray

    @property
    def d1(self) -> int:
        return len(self.classes.I1)

    @property
    def d2(self) -> int:
        return len(self.classes.I2)

    @property
    def d3(self) -> int:
        return len(self.classes.I3)

    @property
    def d_hat(self) -> int:
        return self.d2 + self.d3


def derived_rates(rates: RateParameters, delta: Sequence[float]) -> DerivedRates:
    delta = _as_vector(delta, rates.d, "delta")
    lb = rates.log_beta
    eta_i = lb * rates.w / delta
    Gamma_i = lb * rates.gamma / delta
    chi_i = lb * (rates.gamma - rates.s) / (2 * delta)
    zeta_i = (rates.gamma - rates.s) / (2 * rates.w)
    xi_i = (2 * rates.w - rates.s) / rates.gamma
    eta, Gamma, chi, zeta = eta_i.min(), Gamma_i.max(), chi_i.max(), zeta_i.max()
    xi = float(xi_i.min())
    if abs(xi) < 1e-14:
        xi = 0.0
    return DerivedRates(
        eta=float(eta),
        e_mult=_argext_count(eta_i, eta),
        Gamma=float(Gamma),
        g_mult=_argext_count(Gamma_i, Gamma),
        chi=float(chi),
        x_mult=_argext_count(chi_i, chi),
        zeta=float(zeta),
        z_mult=_argext_count(zeta_i, zeta),
        xi=xi,
        classes=classify_directions(rates),
        g_bar=rates.g_bar,
    )


# ---------------------------------------------------------------------------
# level selection


def ft_bias_constant(rates: RateParameters) -> float:
    """``d prod_j beta_j^w_j / (1 - beta_j^-w_j)``."""
    bw = rates.beta ** rates.w
    return float(rates.d * np.prod(bw / (1 - 1 / bw)))


def ft_levels_for_tol(rates: RateParameters, tol: float, theta: float = 0.5) -> np.ndarray:
    """Per-direction full-tensor levels meeting the bias budget ``(1-theta) TOL``."""
    if not tol > 0 or not 0 < theta < 1:
        raise ValueError("need tol > 0 and 0 < theta < 1")
    tol_b = (1 - theta) * tol / rates.Q_W
    L = (math.log(1 / tol_b) + math.log(ft_bias_constant(rates))) / rates.w_bar
    return np.maximum(L, 0.0)


def td_bias_constant(rates: RateParameters, delta: Sequence[float]) -> float:
    delta = _as_vector(delta, rates.d, "delta")
    cb = bias_bound_constant(rates.w_bar / delta).c_b
    return float(math.exp(rates.w_bar.sum()) * np.prod(1 / delta) * cb)


def td_level_for_tol(
    rates: RateParameters, delta: Sequence[float], tol: float, theta: float = 0.5
) -> float:
    """Total-degree level ``L`` meeting the bias budget asymptotically.

    When ``TOL_B >= 1`` and the minimal-rate multiplicity exceeds one, the
    iterated-log term is undefined and is dropped.
    """
    if not tol > 0 or not 0 < theta < 1:
        raise ValueError("need tol > 0 and 0 < theta < 1")
    dr = derived_rates(rates, delta)
    tol_b = (1 - theta) * tol / rates.Q_W
    log_inv = math.log(1 / tol_b)
    middle = 0.0
    if dr.e_mult > 1 and log_inv / dr.eta > 0:
        middle = (dr.e_mult - 1) * math.log(log_inv / dr.eta)
    L = (log_inv + middle + math.log(td_bias_constant(rates, delta))) / dr.eta
    return max(L, 0.0)


# ---------------------------------------------------------------------------
# complexity


@dataclass
class ComplexityReport:
    method: str
    tol_exponent: float
    log_power: float
    case: Optional[str] = None
    constants: dict = field(default_factory=dict)
    applicable: bool = True
    violated_condition: Optional[str] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def describe(self) -> str:
        s = f"TOL^-{self.tol_exponent:g}"
        if self.log_power:
            s += f" log(1/TOL)^{self.log_power:g}"
        return s


def optimal_delta(rates: RateParameters) -> np.ndarray:
    c = rates.log_beta * (rates.w + (rates.gamma - rates.s) / 2)
    return c / c.sum()


def _lemma_case(dr: DerivedRates) -> tuple[str, float]:
    e, g, x, d2 = dr.e_mult, dr.g_mult, dr.x_mult, dr.d2
    eta, Gamma, chi = dr.eta, dr.Gamma, dr.chi
    if _cmp(chi, 0.0) <= 0:
        c = _cmp(Gamma, 2 * eta)
        if c < 0 or (c == 0 and 2 * e + g < 2 * d2 + 3):
            return "A", 2.0 * d2
        return "C", g - 1 + (e - 1) * Gamma / eta
    c = _cmp(Gamma, 2 * eta + 2 * chi)
    if c < 0 or (c == 0 and 2 * e + g < 2 * x + 1):
        return "B", 2.0 * (x - 1 + (e - 1) * chi / eta)
    return "D", g - 1 + (e - 1) * Gamma / eta


def _theorem_case(dr: DerivedRates, d: int) -> tuple[str, float]:
    zeta, xi, z, d2 = dr.zeta, dr.xi, dr.z_mult, dr.d2
    cz, cx = _cmp(zeta, 0.0), _cmp(xi, 0.0)
    if (cz <= 0 and _cmp(zeta, xi) < 0) or (cz == 0 and cx == 0 and d <= 2):
        return "A", 2.0 * d2
    if cz > 0 and cx > 0:
        return "B", 2.0 * (z - 1) * (zeta + 1)
    if cz == 0 and cx == 0:
        return "C", 2.0 * d2 + d - 3
    return "D", d - 1 + 2.0 * (z - 1) * (1 + zeta)


def _td_constants(rates, delta, dr, case, log_power, theta, eps) -> dict:
    cls = dr.classes
    I1, I23 = list(cls.I1), list(cls.I2) + list(cls.I3)
    beta, s, gamma = rates.beta, rates.s, rates.gamma
    prod1 = float(np.prod(1 - beta[I1] ** (-(s[I1] - gamma[I1]) / 2)))
    c_bias = td_bias_constant(rates, delta)
    out = {"C_Bias": c_bias}
    scale = rates.Q_S * c_epsilon(eps) ** 2 / theta**2
    ratio = (1 - theta) / (c_bias * rates.Q_W)
    if case in ("A", "C"):
        C_A = prod1 * float(np.prod(delta[list(cls.I2)])) * dr.eta**dr.d2 * math.factorial(dr.d2)
        out["C_A"] = C_A
    if case in ("B", "D"):
        cw = work_bound_constant(dr.g_bar[I23] / delta[I23]).c_w
        C_B = (
            prod1
            * float(np.prod(delta[I23]))
            * math.exp(-dr.chi)
            * dr.eta ** (dr.x_mult - 1 + (dr.e_mult - 1) * dr.chi / dr.eta)
            / cw
            * ratio ** (dr.chi / dr.eta)
        )
        out["C_B"] = C_B
    if case in ("C", "D"):
        cw = work_bound_constant(rates.gamma_bar / delta).c_w
        out["C_R"] = (
            float(np.prod(delta))
            * math.exp(-dr.Gamma)
            * dr.eta**log_power
            / cw
            * ratio ** (dr.Gamma / dr.eta)
        )
    e, g, x, d2 = dr.e_mult, dr.g_mult, dr.x_mult, dr.d2
    if case == "A":
        out["leading"] = scale / out["C_A"] ** 2
    elif case == "B":
        out["leading"] = scale / out["C_B"] ** 2
    elif case == "C":
        ind = int(_cmp(dr.Gamma, 2 * dr.eta) == 0 and 2 * e + g == 2 * d2 + 3)
        out["indicator"] = ind
        out["leading"] = ind * scale / out["C_A"] ** 2 + 1 / out["C_R"]
    else:
        ind = int(_cmp(dr.Gamma, 2 * dr.eta + 2 * dr.chi) == 0 and 2 * e + g == 2 * x + 1)
        out["indicator"] = ind
        out["leading"] = ind * scale / out["C_B"] ** 2 + 1 / out["C_R"]
    return out


def complexity_class(
    rates: RateParameters,
    delta: Optional[Sequence[float]] = None,
    theta: float = 0.5,
    eps: float = 0.05,
) -> ComplexityReport:
    """Work complexity of MIMC with total-degree sets of weights ``delta``.

    ``delta=None`` selects the optimal weights, for which the case is read off
    ``(zeta, xi, d, d2)``; otherwise the general-weight inequalities on
    ``(chi, Gamma, eta)`` and their multiplicities decide.
    """
    opt = optimal_delta(rates)
    if delta is None:
        delta = opt
    delta = _as_vector(delta, rates.d, "delta")
    if np.any(delta <= 0) or not math.isclose(delta.sum(), 1.0, rel_tol=1e-12):
        raise ValueError("weights must be positive and sum to one")
    dr = derived_rates(rates, delta)
    is_opt = np.allclose(delta, opt, rtol=1e-12, atol=0)
    if is_opt:
        case, p = _theorem_case(dr, rates.d)
        exponent = 2 * (1 + max(0.0, dr.zeta))
    else:
        case, p = _lemma_case(dr)
        exponent = 2 * (1 + max(0.0, dr.chi / dr.eta, (dr.Gamma - 2 * dr.eta) / (2 * dr.eta)))
    constants = _td_constants(rates, delta, dr, case, p, theta, eps)
    details = {
        "delta": delta.tolist(),
        "optimal_weights": bool(is_opt),
        "eta": dr.eta, "e": dr.e_mult, "Gamma": dr.Gamma, "g": dr.g_mult,
        "chi": dr.chi, "x": dr.x_mult, "zeta": dr.zeta, "z": dr.z_mult, "xi": dr.xi,
        "d1": dr.d1, "d2": dr.d2, "d3": dr.d3,
    }
    return ComplexityReport("MIMC-TD", exponent, _clean(p), case, constants, True, None, details)


def _clean(x: float) -> float:
    r = round(x)
    return float(r) if math.isclose(x, r, abs_tol=1e-9) else float(x)


def ft_complexity(rates: RateParameters, theta: float = 0.5) -> ComplexityReport:
    """Work complexity of MIMC with full-tensor sets.

    The rate holds only while the one-sample-per-index work stays dominated,
    i.e. ``sum_{I1+I2} gamma_i/w_i + sum_{I3} s_i/w_i < 2``; otherwise the
    report is flagged inapplicable and carries the exponent of that term.
    """
    cls = classify_directions(rates)
    I12 = list(cls.I1) + list(cls.I2)
    I3 = list(cls.I3)
    w, s, gamma, beta = rates.w, rates.s, rates.gamma, rates.beta
    cond = float(np.sum(gamma[I12] / w[I12]) + np.sum(s[I3] / w[I3]))
    exponent = 2 + float(np.sum((gamma[I3] - s[I3]) / w[I3]))
    cb = ft_bias_constant(rates)
    factors = []
    for i in range(rates.d):
        if i in cls.I1:
            factors.append({"r": "1", "K": float(1 - beta[i] ** (-(s[i] - gamma[i]) / 2))})
        elif i in cls.I2:
            factors.append({"r": "log(1/TOL)", "K": float(math.log(beta[i]) * w[i])})
        else:
            k = (1 - beta[i] ** (-(gamma[i] - s[i]) / 2)) * (
                (1 - theta) / (cb * rates.Q_W)
            ) ** ((gamma[i] - s[i]) / (2 * w[i]))
            factors.append({"r": f"TOL^-{(gamma[i] - s[i]) / (2 * w[i]):g}", "K": float(k)})
    applicable = cond < 2 and not math.isclose(cond, 2.0, rel_tol=TIE_RTOL)
    violated = None if applicable else f"dominance sum {cond:g} >= 2"
    details = {
        "dominance_sum": cond,
        "remainder_exponent": float(np.sum(gamma / w)),
        "factors": factors,
        "C_B_full_tensor": cb,
        "d1": len(cls.I1), "d2": len(cls.I2), "d3": len(cls.I3),
    }
    return ComplexityReport(
        "MIMC-FT", exponent, 2.0 * len(cls.I2), None, {}, applicable, violated, details
    )


def collapse_rates(rates: RateParameters) -> RateParameters:
    """Single-direction rates of MLMC on isotropic rates: ``(w, s, d gamma)``."""
    if not rates.is_isotropic():
        raise ValueError("MLMC collapse requires isotropic rates")
    return RateParameters(
        d=1,
        beta=rates.beta[0],
        w=rates.w[0],
        s=rates.s[0],
        gamma=rates.d * rates.gamma[0],
        Q_W=rates.Q_W,
        Q_S=rates.Q_S,
        C_work=rates.C_work,
    )


def mlmc_complexity(rates: RateParameters) -> ComplexityReport:
    """Work complexity of MLMC where one level refines all directions at once."""
    c = collapse_rates(rates)
    w, s, g = float(c.w[0]), float(c.s[0]), float(c.gamma[0])
    cmp = _cmp(s, g)
    if cmp > 0:
        exponent, p = 2.0, 0.0
    elif cmp == 0:
        exponent, p = 2.0, 2.0
    else:
        exponent, p = 2.0 + (g - s) / w, 0.0
    return ComplexityReport(
        "MLMC", exponent, p, None, {}, True, None,
        {"w": w, "s": s, "collapsed_gamma": g, "regime": {1: "s>d*gamma", 0: "s=d*gamma", -1: "s<d*gamma"}[cmp]},
    )


# ---------------------------------------------------------------------------
# work and bias surrogates on explicit index sets


def _index_array(index_set: Iterable, d: int) -> np.ndarray:
    arr = np.array([tuple(a) for a in index_set], dtype=float)
    return arr.reshape(-1, d)


def predicted_work_bound(index_set, rates: RateParameters, tol: float, theta: float = 0.5, eps: float = 0.05):
    """``(W_tilde, W_1, bound)`` with ``bound = TOL_S^-2 Q_S C W_tilde^2 + C W_1``."""
    alphas = _index_array(index_set, rates.d)
    w_tilde = float(np.exp(alphas @ rates.g_bar).sum())
    w_one = float(np.exp(alphas @ rates.gamma_bar).sum())
    tol_s = theta * tol / c_epsilon(eps)
    bound = rates.Q_S * rates.C_work * w_tilde**2 / tol_s**2 + rates.C_work * w_one
    return w_tilde, w_one, bound


def predicted_bias_bound(index_set, rates: RateParameters, box: Optional[Sequence[int]] = None) -> float:
    """``Q_W sum_{alpha not in I} prod beta_i^(-w_i alpha_i)``.

    Terms inside the box ``alpha_i <= box_i`` are summed explicitly; the
    remainder outside the box is added in closed form.  The box must contain
    the set and leave a remainder below 1e-3 of the explicit part.
    """
    alphas = _index_array(index_set, rates.d).astype(int)
    if alphas.size == 0:
        raise ValueError("index set must be non-empty")
    r = rates.beta ** (-rates.w)
    auto = box is None
    if auto:
        box = alphas.max(axis=0) + 1
    box = np.asarray(box, dtype=int)
    while True:
        if np.any(alphas.max(axis=0) > box):
            raise BoxTooSmallError("index set exceeds the truncation box")
        shape = tuple(box + 1)
        inside = np.zeros(shape, dtype=bool)
        inside[tuple(alphas.T)] = True
        grids = np.indices(shape).reshape(rates.d, -1).T
        terms = np.exp(-(grids * rates.w_bar).sum(axis=1))
        partial = float(terms[~inside.ravel()].sum())
        full = float(np.prod(1 / (1 - r)))
        # mass outside the box, as 1 - P(inside) to avoid cancellation
        outside = full * -np.expm1(np.sum(np.log1p(-(r ** (box + 1)))))
        if outside <= 1e-3 * partial:
            return rates.Q_W * (partial + outside)
        if not auto:
            raise BoxTooSmallError(
                f"tail outside box {outside:.3g} exceeds 1e-3 of partial sum {partial:.3g}"
            )
        box = box + 1
