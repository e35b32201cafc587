"""Pruned third-order state-space simulation and impact decomposition.

The simulator consumes precomputed perturbation coefficient matrices (it
does not solve a model) and advances three state components that never
feed higher-order terms back into lower-order recursions:

    first_t  = h_v [first_{t-1}; eps_t; eta_t]
    second_t = A second_{t-1} + 2 H_vv m2(first_{t-1}, eps_t, eta_t)
    third_t  = A third_{t-1} + H_vvv m3(...) + (1/2) h_ssv w_t
               + (1/6) h_sss sigma^2

with A the state block of h_v, w_t = [first_{t-1}; eps_t; eta_t], and
m2/m3 the distinct quadratic and cubic monomials of w_t in the frozen
ordering documented next to :func:`mono2`. Observables follow the same
shape with the g-blocks, reading the lagged total state through the
state block of g_v only (its shock columns are carried in the file
format but are inert).

Two shocks drive the system: a level shock ``eps_zeta`` and a
volatility shock ``eta_star``, both unit-variance. The impact of an
``eta_star`` impulse splits into a precautionary term (the ssv block)
and an interaction term (the eps*eps*eta cubic column, with the level
shock integrated out); :func:`decompose_impact` reports both and their
sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

__all__ = [
    "RbcCalibration",
    "BoundResult",
    "zeta_ss_bound",
    "PrunedSolution",
    "PrunedState",
    "mono2",
    "mono3",
    "mono2_len",
    "mono3_len",
    "MONO2_SPECIALS",
    "MONO3_SPECIALS",
    "pruned_step",
    "simulate_path",
    "stochastic_steady_state",
    "irf",
    "decompose_impact",
    "save_solution",
    "load_solution",
    "demo_solution_path",
]


# ----------------------------------------------------------------------
# calibration and the borrowing bound
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RbcCalibration:
    """Quarterly calibration of the collateral-constraint model.

    alpha : capital share in production
    beta_disc : household discount factor
    delta : capital depreciation rate
    phi_adj : investment adjustment cost curvature
    theta_labor : labor disutility scale (pins steady-state hours at 1/3)
    gamma_c : inverse intertemporal elasticity of substitution
    chi : inverse Frisch elasticity
    zeta_ss : steady-state borrowable fraction of capital value
    h_bar : mean log-volatility of the borrowing-limit process
    rho_h : volatility persistence
    tau : vol-of-vol
    rho_ar : AR(1) persistence of the borrowing limit
    nu : share of hand-to-mouth households (0 = baseline)
    theta_r : hand-to-mouth labor disutility scale (9 pins their hours at 1/3)
    """

    alpha: float = 0.33
    beta_disc: float = 0.99
    delta: float = 0.02
    phi_adj: float = 4.0
    theta_labor: float = 5.7241
    gamma_c: float = 1.0
    chi: float = 1.0
    zeta_ss: float = 0.017
    h_bar: float = -10.12
    rho_h: float = 0.91
    tau: float = 0.25
    rho_ar: float = 0.83
    nu: float = 0.0
    theta_r: float = 9.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta_disc < 1.0:
            raise ValueError(f"beta_disc must lie in (0, 1), got {self.beta_disc}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.zeta_ss <= 0.0:
            raise ValueError(f"zeta_ss must be positive, got {self.zeta_ss}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"nu must lie in [0, 1), got {self.nu}")


@dataclass(frozen=True)
class BoundResult:
    bound: float
    admissible: bool
    note: str


def zeta_ss_bound(calib):
    """Upper bound on the steady-state borrowable fraction.

    A binding constraint (positive multiplier) in steady state requires
    zeta_ss < ((1-alpha)/alpha) * (1/beta - (1-delta)). Returns the
    bound, whether the calibrated zeta_ss satisfies it, and a note: at
    alpha=0.33, beta=0.99, delta=0.02 the formula gives 0.0611, which
    disagrees with the figure 0.0602 quoted elsewhere for the same
    inputs; the direct evaluation is reported, not the quoted value.
    """
    c = calib
    bound = ((1.0 - c.alpha) / c.alpha) * (1.0 / c.beta_disc - (1.0 - c.delta))
    note = (
        f"bound = {bound:.6f} for alpha={c.alpha}, beta={c.beta_disc}, "
        f"delta={c.delta}; the reported figure 0.0602 for this calibration "
        f"does not match the direct evaluation"
    )
    return BoundResult(bound=bound, admissible=c.zeta_ss < bound, note=note)


# ----------------------------------------------------------------------
# monomial bases
# ----------------------------------------------------------------------
#
# Frozen ordering of the distinct monomials of w = [x; eps; eta]:
#   quadratic: x(x)x (row-major n*n), x*eps (n), x*eta (n),
#              eps^2, eps*eta, eta^2
#   cubic:     x(x)x(x)x (n^3), x(x)x*eps (n^2), x(x)x*eta (n^2),
#              x*eps^2 (n), x*eps*eta (n), x*eta^2 (n),
#              eps^3, eps^2*eta, eps*eta^2, eta^3


def mono2_len(n_x):
    return n_x * n_x + 2 * n_x + 3


def mono3_len(n_x):
    return n_x**3 + 2 * n_x * n_x + 3 * n_x + 4


def MONO2_SPECIALS(n_x):
    """Column positions of the pure-shock quadratic monomials."""
    base = n_x * n_x + 2 * n_x
    return {"eps_sq": base, "eps_eta": base + 1, "eta_sq": base + 2}


def MONO3_SPECIALS(n_x):
    """Column positions of the pure-shock cubic monomials."""
    base = n_x**3 + 2 * n_x * n_x + 3 * n_x
    return {
        "eps_cubed": base,
        "eps_sq_eta": base + 1,
        "eps_eta_sq": base + 2,
        "eta_cubed": base + 3,
    }


def mono2(x, eps, eta):
    x = np.asarray(x, dtype=float)
    return np.concatenate(
        [np.kron(x, x), x * eps, x * eta, [eps * eps, eps * eta, eta * eta]]
    )


def mono3(x, eps, eta):
    x = np.asarray(x, dtype=float)
    xx = np.kron(x, x)
    return np.concatenate(
        [
            np.kron(x, xx),
            xx * eps,
            xx * eta,
            x * (eps * eps),
            x * (eps * eta),
            x * (eta * eta),
            [eps**3, eps * eps * eta, eps * eta * eta, eta**3],
        ]
    )


# ----------------------------------------------------------------------
# solution container
# ----------------------------------------------------------------------

_MATRIX_NAMES = (
    "h_v",
    "H_vv",
    "H_vvv",
    "h_ssv",
    "h_sss",
    "g_v",
    "G_vv",
    "G_vvv",
    "g_ssv",
    "g_sss",
)


@dataclass(frozen=True)
class PrunedSolution:
    """Coefficient matrices of a pruned third-order solution.

    Labels flagged in ``state_in_logs`` / ``control_in_logs`` (the
    default) are treated as log deviations: impulse responses report raw
    differences. Unflagged variables are converted to percent deviations
    from the baseline path.
    """

    state_labels: tuple
    control_labels: tuple
    h_v: np.ndarray
    H_vv: np.ndarray
    H_vvv: np.ndarray
    h_ssv: np.ndarray
    h_sss: np.ndarray
    g_v: np.ndarray
    G_vv: np.ndarray
    G_vvv: np.ndarray
    g_ssv: np.ndarray
    g_sss: np.ndarray
    sigma_scale: float = 1.0
    state_in_logs: tuple = ()
    control_in_logs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "state_labels", tuple(str(s) for s in self.state_labels))
        object.__setattr__(self, "control_labels", tuple(str(s) for s in self.control_labels))
        n_x, n_y = len(self.state_labels), len(self.control_labels)
        if n_x < 1 or n_y < 1:
            raise ValueError("at least one state and one control label required")
        if len(set(self.state_labels) | set(self.control_labels)) != n_x + n_y:
            raise ValueError("variable labels must be unique")
        if not self.sigma_scale > 0.0:
            raise ValueError(f"sigma_scale must be positive, got {self.sigma_scale}")
        n_v, m2, m3 = n_x + 2, mono2_len(n_x), mono3_len(n_x)
        expect = {
            "h_v": (n_x, n_v),
            "H_vv": (n_x, m2),
            "H_vvv": (n_x, m3),
            "h_ssv": (n_x, n_v),
            "h_sss": (n_x,),
            "g_v": (n_y, n_v),
            "G_vv": (n_y, m2),
            "G_vvv": (n_y, m3),
            "g_ssv": (n_y, n_v),
            "g_sss": (n_y,),
        }
        for name, shape in expect.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if name in ("h_sss", "g_sss"):
                arr = arr.reshape(-1)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        for attr, want in (("state_in_logs", n_x), ("control_in_logs", n_y)):
            flags = getattr(self, attr)
            if flags == ():
                flags = (True,) * want
            flags = tuple(bool(f) for f in flags)
            if len(flags) != want:
                raise ValueError(f"{attr} must have {want} entries, got {len(flags)}")
            object.__setattr__(self, attr, flags)

    @property
    def n_x(self):
        return len(self.state_labels)

    @property
    def n_y(self):
        return len(self.control_labels)

    @property
    def transition(self):
        """First-order state block of h_v."""
        return self.h_v[:, : self.n_x]


@dataclass(frozen=True)
class PrunedState:
    """First-, second- and third-order state components."""

    first: np.ndarray
    second: np.ndarray
    third: np.ndarray

    @classmethod
    def zeros(cls, n_x):
        return cls(np.zeros(n_x), np.zeros(n_x), np.zeros(n_x))

    @property
    def total(self):
        return self.first + self.second + self.third


# ----------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------


def pruned_step(sol, state, shocks):
    """One transition; returns the next state triple and the observables
    dated with it (observables read the lagged total state plus the
    current shocks)."""
    n_x = sol.n_x
    for comp in (state.first, state.second, state.third):
        if np.shape(comp) != (n_x,):
            raise ValueError(
                f"state components must have shape ({n_x},), got {np.shape(comp)}"
            )
    eps, eta = float(shocks[0]), float(shocks[1])
    A = sol.transition
    sig2 = sol.sigma_scale**2
    w = np.concatenate([state.first, [eps, eta]])
    m2 = mono2(state.first, eps, eta)
    m3 = mono3(state.first, eps, eta)
    new_first = sol.h_v @ w
    new_second = A @ state.second + 2.0 * (sol.H_vv @ m2)
    new_third = (
        A @ state.third + sol.H_vvv @ m3 + 0.5 * (sol.h_ssv @ w) + sol.h_sss * sig2 / 6.0
    )
    controls = (
        sol.g_v[:, :n_x] @ state.total
        + 2.0 * (sol.G_vv @ m2)
        + sol.G_vvv @ m3
        + 0.5 * (sol.g_ssv @ w)
        + sol.g_sss * sig2 / 6.0
    )
    return PrunedState(new_first, new_second, new_third), controls


def simulate_path(sol, start, eps_path, eta_path):
    """Iterate pruned_step along given shock paths.

    Returns (states, controls) with shape (T, n_x) and (T, n_y); row t
    holds the total state after the period-t shocks and the observables
    dated t.
    """
    eps_path = np.asarray(eps_path, dtype=float)
    eta_path = np.asarray(eta_path, dtype=float)
    if eps_path.shape != eta_path.shape or eps_path.ndim != 1:
        raise ValueError("shock paths must be equal-length 1-d arrays")
    T = eps_path.shape[0]
    states = np.empty((T, sol.n_x))
    controls = np.empty((T, sol.n_y))
    st = start
    for t in range(T):
        st, y = pruned_step(sol, st, (eps_path[t], eta_path[t]))
        states[t] = st.total
        controls[t] = y
    return states, controls


def stochastic_steady_state(sol, tol=1e-12, max_iter=100_000):
    """Fixed point of the zero-shock transition.

    Raises RuntimeError if the iteration has not settled within
    max_iter steps (an unstable first-order block, say).
    """
    st = PrunedState.zeros(sol.n_x)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            new, y = pruned_step(sol, st, (0.0, 0.0))
            delta = max(
                np.max(np.abs(new.first - st.first)),
                np.max(np.abs(new.second - st.second)),
                np.max(np.abs(new.third - st.third)),
            )
            if not np.isfinite(delta):
                raise RuntimeError("steady-state iteration diverged; did not converge")
            st = new
            if delta < tol:
                return st, y
    raise RuntimeError(f"steady state did not converge within {max_iter} iterations")


# ----------------------------------------------------------------------
# expected paths with the level shock integrated out
# ----------------------------------------------------------------------


def _sym3(w, M):
    """Symmetrized outer product of a vector with a symmetric matrix."""
    return (
        np.einsum("i,jk->ijk", w, M)
        + np.einsum("j,ik->ijk", w, M)
        + np.einsum("k,ij->ijk", w, M)
    )


def _expected_path(sol, eta_path, start):
    """Exact expectation of the pruned paths over eps ~ N(0,1) i.i.d.

    Propagates the mean, second and third moment of the first-order
    component in closed form; the higher-order components and the
    observables are linear in those moments.
    """
    n_x = sol.n_x
    A = sol.transition
    b = sol.h_v[:, n_x]
    q = sol.h_v[:, n_x + 1]
    bb = np.outer(b, b)
    sig2 = sol.sigma_scale**2
    m = np.array(start.first, dtype=float)
    P = np.outer(m, m)
    T3 = np.einsum("i,j,k->ijk", m, m, m)
    x2 = np.array(start.second, dtype=float)
    x3 = np.array(start.third, dtype=float)
    T = len(eta_path)
    states = np.empty((T, n_x))
    controls = np.empty((T, sol.n_y))
    for t, eta in enumerate(eta_path):
        w_mean = np.concatenate([m, [0.0, eta]])
        Em2 = np.concatenate(
            [P.ravel(), np.zeros(n_x), m * eta, [1.0, 0.0, eta * eta]]
        )
        Em3 = np.concatenate(
            [
                T3.ravel(),
                np.zeros(n_x * n_x),
                (P * eta).ravel(),
                m,
                np.zeros(n_x),
                m * (eta * eta),
                [0.0, eta, 0.0, eta**3],
            ]
        )
        controls[t] = (
            sol.g_v[:, :n_x] @ (m + x2 + x3)
            + 2.0 * (sol.G_vv @ Em2)
            + sol.G_vvv @ Em3
            + 0.5 * (sol.g_ssv @ w_mean)
            + sol.g_sss * sig2 / 6.0
        )
        x2 = A @ x2 + 2.0 * (sol.H_vv @ Em2)
        x3 = A @ x3 + sol.H_vvv @ Em3 + 0.5 * (sol.h_ssv @ w_mean) + sol.h_sss * sig2 / 6.0
        c = q * eta
        Am = A @ m
        APA = A @ P @ A.T
        T3 = (
            np.einsum("ia,jb,kc,abc->ijk", A, A, A, T3)
            + _sym3(c, APA)
            + _sym3(Am, np.outer(c, c))
            + np.einsum("i,j,k->ijk", c, c, c)
            + _sym3(Am + c, bb)
        )
        P = APA + np.outer(Am, c) + np.outer(c, Am) + np.outer(c, c) + bb
        m = Am + c
        states[t] = m + x2 + x3
    return states, controls


# ----------------------------------------------------------------------
# impulse responses and the impact decomposition
# ----------------------------------------------------------------------


def irf(sol, shock_name, size=1.0, horizon=40, integrate_level_shock=False, start="stochastic"):
    """Impulse response paths, horizon 0..horizon, per variable label.

    Deterministic by default: shocked minus baseline path with all other
    shock realizations pinned at zero. With ``integrate_level_shock``
    the level shock is averaged out analytically instead, which is the
    mode under which the horizon-0 response reproduces the impact
    decomposition; it applies to eta_star impulses only.

    ``start`` is "stochastic" (the zero-shock fixed point) or "zero".
    Responses of log-deviation variables are raw differences; others are
    percent deviations from the baseline path.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if shock_name not in ("eps_zeta", "eta_star"):
        raise ValueError(f"unknown shock {shock_name!r}; use 'eps_zeta' or 'eta_star'")
    if start == "stochastic":
        st0, _ = stochastic_steady_state(sol)
    elif start == "zero":
        st0 = PrunedState.zeros(sol.n_x)
    else:
        raise ValueError(f"start must be 'stochastic' or 'zero', got {start!r}")
    T = horizon + 1
    zero = np.zeros(T)
    if integrate_level_shock:
        if shock_name != "eta_star":
            raise ValueError("level-shock integration applies to eta_star impulses only")
        eta = zero.copy()
        eta[0] = size
        s_shock, y_shock = _expected_path(sol, eta, st0)
        s_base, y_base = _expected_path(sol, zero, st0)
    else:
        eps, eta = zero.copy(), zero.copy()
        (eps if shock_name == "eps_zeta" else eta)[0] = size
        s_shock, y_shock = simulate_path(sol, st0, eps, eta)
        s_base, y_base = simulate_path(sol, st0, zero, zero)

    out = {}
    blocks = (
        (sol.state_labels, sol.state_in_logs, s_shock, s_base),
        (sol.control_labels, sol.control_in_logs, y_shock, y_base),
    )
    for labels, in_logs, shocked, base in blocks:
        for i, lab in enumerate(labels):
            diff = shocked[:, i] - base[:, i]
            if in_logs[i]:
                out[lab] = diff
            else:
                ref = base[:, i]
                if np.any(np.abs(ref) < 1e-12):
                    raise ValueError(
                        f"baseline for {lab!r} passes through zero; "
                        "cannot form percent deviations"
                    )
                out[lab] = 100.0 * diff / np.abs(ref)
    return out


def decompose_impact(sol, eta_star=1.0):
    """Impact of a volatility impulse split into its two channels.

    direct: the ssv column for eta_star times the impulse (the
    precautionary term); interaction: the cubic coefficient on the
    eps*eps*eta monomial times the impulse (the level shock integrated
    to its unit second moment). Total is their sum, exactly. Rows cover
    the observable variables.
    """
    n_x = sol.n_x
    direct = 0.5 * sol.g_ssv[:, n_x + 1] * eta_star
    interaction = sol.G_vvv[:, MONO3_SPECIALS(n_x)["eps_sq_eta"]] * eta_star
    return pd.DataFrame(
        {
            "variable": list(sol.control_labels),
            "direct": direct,
            "interaction": interaction,
            "total": direct + interaction,
        }
    )


# ----------------------------------------------------------------------
# solution file format
# ----------------------------------------------------------------------
#
# Self-describing text layout:
#
#   pruned-solution-v1
#   sigma <float>
#   states <n_x>
#   <label[:log]> ...
#   controls <n_y>
#   <label[:log]> ...
#   matrix <name> <rows> <cols>
#   <cols floats per row, rows lines>
#   ... (one block per matrix name, all ten required)
#   end

_FORMAT_HEADER = "pruned-solution-v1"


def save_solution(sol, path):
    lines = [_FORMAT_HEADER, f"sigma {sol.sigma_scale!r}"]
    for tag, labels, flags in (
        ("states", sol.state_labels, sol.state_in_logs),
        ("controls", sol.control_labels, sol.control_in_logs),
    ):
        lines.append(f"{tag} {len(labels)}")
        lines.append(" ".join(l + (":log" if f else "") for l, f in zip(labels, flags)))
    for name in _MATRIX_NAMES:
        arr = np.atleast_2d(getattr(sol, name))
        if name in ("h_sss", "g_sss"):
            arr = arr.reshape(-1, 1)
        lines.append(f"matrix {name} {arr.shape[0]} {arr.shape[1]}")
        for row in arr:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_labels(line, count, lineno):
    toks = line.split()
    if len(toks) != count:
        raise ValueError(f"line {lineno}: expected {count} labels, found {len(toks)}")
    labels, flags = [], []
    for tok in toks:
        if tok.endswith(":log"):
            labels.append(tok[: -len(":log")])
            flags.append(True)
        else:
            labels.append(tok)
            flags.append(False)
    return tuple(labels), tuple(flags)


def load_solution(path):
    """Parse a solution file; dimension errors name the offending block."""
    raw = Path(path).read_text().splitlines()
    lines = [(i + 1, l.strip()) for i, l in enumerate(raw) if l.strip()]
    if not lines or lines[0][1] != _FORMAT_HEADER:
        raise ValueError(f"{path}: unrecognized header; expected {_FORMAT_HEADER!r}")
    pos = 1
    sigma = None
    labels = {}
    flags = {}
    matrices = {}
    while pos < len(lines):
        lineno, line = lines[pos]
        toks = line.split()
        if toks[0] == "end":
            break
        if toks[0] == "sigma":
            sigma = float(toks[1])
            pos += 1
        elif toks[0] in ("states", "controls"):
            count = int(toks[1])
            if pos + 1 >= len(lines):
                raise ValueError(f"line {lineno}: {toks[0]} label line missing")
            labels[toks[0]], flags[toks[0]] = _parse_labels(
                lines[pos + 1][1], count, lines[pos + 1][0]
            )
            pos += 2
        elif toks[0] == "matrix":
            if len(toks) != 4:
                raise ValueError(f"line {lineno}: malformed matrix header {line!r}")
            name, rows, cols = toks[1], int(toks[2]), int(toks[3])
            if name not in _MATRIX_NAMES:
                raise ValueError(f"line {lineno}: unknown matrix block {name!r}")
            data = np.empty((rows, cols))
            for r in range(rows):
                if pos + 1 + r >= len(lines):
                    raise ValueError(f"matrix {name}: truncated after {r} rows")
                rl_no, rl = lines[pos + 1 + r]
                vals = rl.split()
                if len(vals) != cols:
                    raise ValueError(
                        f"line {rl_no}: matrix {name} row has {len(vals)} values, "
                        f"expected {cols}"
                    )
                data[r] = [float(v) for v in vals]
            matrices[name] = data
            pos += 1 + rows
        else:
            raise ValueError(f"line {lineno}: unexpected directive {toks[0]!r}")
    else:
        raise ValueError(f"{path}: missing 'end' terminator")
    if sigma is None:
        raise ValueError(f"{path}: missing sigma line")
    for tag in ("states", "controls"):
        if tag not in labels:
            raise ValueError(f"{path}: missing {tag} declaration")
    missing = [n for n in _MATRIX_NAMES if n not in matrices]
    if missing:
        raise ValueError(f"{path}: missing matrix block(s): {', '.join(missing)}")
    return PrunedSolution(
        state_labels=labels["states"],
        control_labels=labels["controls"],
        sigma_scale=sigma,
        state_in_logs=flags["states"],
        control_in_logs=flags["controls"],
        **matrices,
    )


def demo_solution_path():
    """Bundled example solution (3 states, 9 observables)."""
    return Path(__file__).parent / "data" / "demo_solution.txt"
