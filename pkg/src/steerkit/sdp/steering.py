"""Steering detection by semidefinite programming.

The LHS test for an assemblage ``sigma[x, a]`` is posed as::

    maximise t  s.t.  sigma_lam >= t I / (3 N),  sum_lam D(a|x,lam) sigma_lam = sigma[x, a]

over the ``N = 3**m`` deterministic strategies. Its optimum ``t*`` is
positive (interior LHS model), zero (boundary) or negative (steerable).
Substituting ``sigma_lam = X_lam + t I/(3N)`` and eliminating ``t`` through
the trace identity leaves a standard-form SDP in the ``X_lam >= 0`` alone.
The dual is the witness problem

    minimise  sum Tr(F[x,a] sigma[x,a])  s.t.  sum_x F[x, lam(x)] >= 0,
              mean_lam Tr(sum_x F[x, lam(x)]) = 3

whose optimal value equals ``t*``. A verdict is only reported after the
returned witness or LHS decomposition passes :func:`verify_certificate`,
which recomputes everything from scratch.
"""
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .. import measure
from ..errors import ShapeMismatch, SolverStalled, TooManySettings
from ..qcore import herm_to_vec, vec_to_herm
from . import ipm
from ._kernels import gather_rows, marginal_gram, scatter_rows

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
NEGATIVE_GUARD = 1e-6
MAX_SETTINGS = 8

STEERABLE = "STEERABLE"
NO_CERTIFICATE = "NO_CERTIFICATE"

_E0 = np.sqrt(3.0)  # coordinate of I along HERM_BASIS[0]


@dataclass(frozen=True)
class StrategyTable:
    """Deterministic strategies for ``m`` settings with 3 outcomes.

    ``outcome[lam, x]`` is the outcome index (0, 1, 2 for -1, 0, +1)
    strategy ``lam`` assigns to setting ``x``: the base-3 digit ``x`` of
    ``lam``, least significant first.
    """

    m: int
    outcome: np.ndarray

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def rows(self) -> np.ndarray:
        """Flat row-block index ``3 * x + a`` hit by each (strategy, setting)."""
        return self.outcome + 3 * np.arange(self.m)[None, :]

    def indicator(self) -> np.ndarray:
        """``D[lam, x, a]`` in {0, 1}."""
        d = np.zeros((self.n, self.m, 3))
        d[np.arange(self.n)[:, None], np.arange(self.m)[None, :], self.outcome] = 1.0
        return d


@lru_cache(maxsize=None)
def enumerate_strategies(m: int) -> StrategyTable:
    if not 1 <= m <= MAX_SETTINGS:
        raise TooManySettings(f"m={m} outside 1..{MAX_SETTINGS}")
    lam = np.arange(3**m)
    outcome = (lam[:, None] // 3 ** np.arange(m)[None, :]) % 3
    outcome.setflags(write=False)
    return StrategyTable(m, outcome)


@dataclass
class LhsDecomposition:
    sigma_lambda: np.ndarray  # (N, 3, 3)
    margin: float  # t value of the decomposition


@dataclass
class DualCertificate:
    F: np.ndarray  # (m, 3, 3, 3) indexed [x, a]
    value: float


@dataclass
class SteeringVerdict:
    kind: str
    certificate: DualCertificate | None = None
    decomposition: LhsDecomposition | None = None
    stats: dict = field(default_factory=dict)

    @property
    def steerable(self) -> bool:
        return self.kind == STEERABLE

    def summary(self) -> dict:
        out = {"verdict": self.kind, **self.stats}
        if self.certificate is not None:
            out["witness_value"] = self.certificate.value
        if self.decomposition is not None:
            out["lhs_margin"] = self.decomposition.margin
        return out


# ----------------------------------------------------------------------------
# problem operators


class _Reduced:
    """Row reduction ``A_r = Q^T A`` onto an orthonormal basis of range(A)."""

    def __init__(self, aat: np.ndarray):
        w, v = np.linalg.eigh(aat)
        keep = w > 1e-9 * w.max()
        self.q = v[:, keep]
        self.s = w[keep]


class LhsProblem:
    """Standard-form LHS test for a fixed strategy table (data enters only via ``b``)."""

    def __init__(self, table: StrategyTable, sigma: np.ndarray):
        self.table = table
        self.rows = np.ascontiguousarray(table.rows)
        self.nrow = 3 * table.m
        self.nblocks = table.n
        c = np.zeros((self.nblocks, 9))
        c[:, 0] = _E0
        self.c = c
        self._red = _reduction(table.m)
        full = herm_to_vec(np.asarray(sigma).reshape(self.nrow, 3, 3))
        full[:, 0] -= _E0 / 9.0
        self.b = self._red.q.T @ full.ravel()

    def _A_full(self, x):
        out = scatter_rows(self.rows, x, self.nrow)
        out[:, 0] -= x[:, 0].sum() / 3.0
        return out.ravel()

    def _AT_full(self, y):
        y = y.reshape(self.nrow, 9)
        out = gather_rows(self.rows, y)
        out[:, 0] -= y[:, 0].sum() / 3.0
        return out

    def _schur_full(self, g):
        # M_pq = K_pq - R_p P - P R_q + P S P, with P = e0 e0^T / 3 and R_p = K_pp
        k = marginal_gram(self.rows, g, self.nrow)
        idx = np.arange(self.nrow)
        r = k[idx, :, idx, :].copy()
        s = g.sum(axis=0)
        k[:, :, :, 0] -= (r[:, :, 0] / 3.0)[:, :, None]
        k[:, 0, :, :] -= (r[:, 0, :] / 3.0)[None, :, :]
        k[:, 0, :, 0] += s[0, 0] / 9.0
        return k.reshape(self.nrow * 9, self.nrow * 9)

    def A(self, x):
        return self._red.q.T @ self._A_full(x)

    def AT(self, y):
        return self._AT_full(self._red.q @ y)

    def schur(self, g):
        q = self._red.q
        return q.T @ self._schur_full(g) @ q

    def project(self, x):
        """Least-norm correction of ``x`` onto ``A(x) = b``."""
        r = self.b - self.A(x)
        return x + self.AT(r / self._red.s)


class WeightProblem:
    """Steering-weight SDP: strategy blocks followed by one slack block per (x, a)."""

    def __init__(self, table: StrategyTable, sigma: np.ndarray):
        self.table = table
        self.rows = np.ascontiguousarray(table.rows)
        self.nrow = 3 * table.m
        self.nlam = table.n
        self.nblocks = self.nlam + self.nrow
        c = np.zeros((self.nblocks, 9))
        c[: self.nlam, 0] = -_E0
        self.c = c
        self.b = herm_to_vec(sigma.reshape(self.nrow, 3, 3)).ravel()

    def A(self, x):
        out = scatter_rows(self.rows, x[: self.nlam], self.nrow) + x[self.nlam :]
        return out.ravel()

    def AT(self, y):
        y = y.reshape(self.nrow, 9)
        return np.concatenate([gather_rows(self.rows, y), y])

    def schur(self, g):
        k = marginal_gram(self.rows, g[: self.nlam], self.nrow)
        idx = np.arange(self.nrow)
        k[idx, :, idx, :] += g[self.nlam :]
        return k.reshape(self.nrow * 9, self.nrow * 9)


@lru_cache(maxsize=None)
def _reduction(m: int) -> _Reduced:
    # A A^T depends only on the strategy table, so it is factored once per m
    table = enumerate_strategies(m)
    probe = LhsProblem.__new__(LhsProblem)
    probe.rows = np.ascontiguousarray(table.rows)
    probe.nrow = 3 * m
    eye = np.broadcast_to(np.eye(9), (table.n, 9, 9))
    return _Reduced(probe._schur_full(eye))


# ----------------------------------------------------------------------------
# certificates


def witness_from_dual(problem: LhsProblem, y: np.ndarray, m: int) -> np.ndarray:
    g = vec_to_herm((problem._red.q @ y).reshape(3 * m, 9))
    shift = 1.0 + np.trace(g.sum(axis=0)).real / 9.0
    f = -g + shift * np.eye(3) / m
    return f.reshape(m, 3, 3, 3)


def strategy_sums(f: np.ndarray, table: StrategyTable) -> np.ndarray:
    """``sum_x F[x, lam(x)]`` for every strategy, shape ``(N, 3, 3)``."""
    x = np.arange(table.m)
    return f[x[None, :], table.outcome].sum(axis=1)


def polish_witness(f: np.ndarray, table: StrategyTable) -> np.ndarray:
    """Shift ``F[x, a] += c I / m`` so that every strategy sum is PSD.

    The shift raises every strategy sum by ``c I`` and the witness value by
    exactly ``c`` for a normalised assemblage, so validity is restored at a
    known cost.
    """
    lmin = float(np.linalg.eigvalsh(strategy_sums(f, table))[:, 0].min())
    if lmin >= 0:
        return f
    return f + (-lmin) * np.eye(3) / table.m


def _lhs_from_primal(problem: LhsProblem, x: np.ndarray) -> LhsDecomposition:
    x = problem.project(x)
    n = problem.nblocks
    t = 1.0 - _E0 * x[:, 0].sum()
    sig = vec_to_herm(x) + t * np.eye(3) / (3.0 * n)
    return LhsDecomposition(sigma_lambda=sig, margin=float(t))


def verify_certificate(cert, sigma: np.ndarray, table: StrategyTable, tol: float = DEFAULT_TOL) -> bool:
    """Independent check of a witness or an LHS decomposition.

    Witness: every strategy sum has eigenvalues >= -tol, the stored value
    matches ``sum Tr(F sigma)`` within tol, and that value is below
    ``-NEGATIVE_GUARD``. Decomposition: every member has eigenvalues
    >= -tol and the strategy marginals reproduce ``sigma`` within tol per
    entry.
    """
    sigma = np.asarray(sigma)
    m = table.m
    if sigma.shape != (m, 3, 3, 3):
        raise ShapeMismatch(f"assemblage shape {sigma.shape} does not match m={m}")
    if isinstance(cert, DualCertificate):
        f = np.asarray(cert.F)
        if f.shape != sigma.shape:
            raise ShapeMismatch(f"witness shape {f.shape} != {sigma.shape}")
        if np.max(np.abs(f - np.conj(np.swapaxes(f, -1, -2)))) > tol:
            return False
        sums = np.zeros((table.n, 3, 3), dtype=np.complex128)
        for x in range(m):
            sums += f[x][table.outcome[:, x]]
        if np.linalg.eigvalsh(sums).min() < -tol:
            return False
        value = float(np.einsum("xaij,xaji->", f, sigma).real)
        return abs(value - cert.value) <= tol and value < -NEGATIVE_GUARD
    if isinstance(cert, LhsDecomposition):
        s = np.asarray(cert.sigma_lambda)
        if s.shape != (table.n, 3, 3):
            raise ShapeMismatch(f"decomposition shape {s.shape} != {(table.n, 3, 3)}")
        if np.max(np.abs(s - np.conj(np.swapaxes(s, -1, -2)))) > tol:
            return False
        if np.linalg.eigvalsh(s).min() < -tol:
            return False
        recon = np.zeros_like(sigma)
        for x in range(m):
            for a in range(3):
                recon[x, a] = s[table.outcome[:, x] == a].sum(axis=0)
        return float(np.max(np.abs(recon - sigma))) <= tol
    raise ShapeMismatch(f"unsupported certificate type {type(cert).__name__}")


# ----------------------------------------------------------------------------
# detection


def lhs_feasibility(
    sigma: np.ndarray,
    tol: float = DEFAULT_TOL,
    early_stop: bool = True,
    max_iter: int = 80,
) -> SteeringVerdict:
    """Decide whether ``sigma`` admits an LHS model, with a checked certificate.

    Raises ``SolverStalled`` when neither a witness nor a decomposition
    passes verification.
    """
    sigma = np.asarray(sigma, dtype=np.complex128)
    measure.check_assemblage(sigma, tol=max(tol, 1e-10))
    m = sigma.shape[0]
    table = enumerate_strategies(m)
    problem = LhsProblem(table, sigma)
    found: dict = {}

    def try_witness(y):
        f = polish_witness(witness_from_dual(problem, y, m), table)
        value = float(np.einsum("xaij,xaji->", f, sigma).real)
        if value < -NEGATIVE_GUARD:
            cert = DualCertificate(F=f, value=value)
            if verify_certificate(cert, sigma, table, tol):
                found["cert"] = cert
                return True
        return False

    def try_primal(x):
        dec = _lhs_from_primal(problem, x)
        if dec.margin > -tol and verify_certificate(dec, sigma, table, tol):
            found["dec"] = dec
            return True
        return False

    def monitor(state):
        if not early_stop or state.iteration < 3:
            return False
        upper = 1.0 - float(problem.b @ state.y)
        if upper < -NEGATIVE_GUARD and try_witness(state.y):
            return True
        lower = 1.0 - _E0 * float(state.x[:, 0].sum())
        return lower > 0 and try_primal(state.x)

    x0 = np.zeros((problem.nblocks, 9))
    x0[:, 0] = 1.0 / (_E0 * problem.nblocks)
    res = ipm.solve(problem, x0=x0, max_iter=max_iter, monitor=monitor)
    st = res.state
    stats = {
        "m": m,
        "iterations": st.iteration,
        "status": res.status,
        "t_upper": 1.0 - float(problem.b @ st.y),
        "t_lower": 1.0 - _E0 * float(st.x[:, 0].sum()),
        "pinf": st.pinf,
        "gap": st.gap,
    }
    if not found:
        if not try_witness(st.y):
            try_primal(st.x)
    if "cert" in found:
        return SteeringVerdict(STEERABLE, certificate=found["cert"], stats=stats)
    if "dec" in found:
        return SteeringVerdict(NO_CERTIFICATE, decomposition=found["dec"], stats=stats)
    raise SolverStalled(f"no verified certificate after {st.iteration} iterations ({res.status}); stats={stats}")


def _weight_start(problem: "WeightProblem", sigma: np.ndarray) -> np.ndarray:
    """Strictly feasible start ``sigma~_lam = eps I``, slacks ``sigma[x,a] - (N/3) eps I``.

    Starting on the primal-feasible set keeps the iterates feasible, which
    matters for assemblages with nearly singular elements. Falls back to a
    scaled identity when some ``sigma[x,a]`` is numerically singular.
    """
    nlam = problem.nlam
    lam_min = float(np.linalg.eigvalsh(sigma.reshape(-1, 3, 3)).min())
    x0 = np.zeros((problem.nblocks, 9))
    if lam_min <= 1e-12:
        x0[:, 0] = 1.0 / (_E0 * problem.nblocks)
        return x0
    eps = 0.5 * lam_min * 3.0 / nlam
    x0[:nlam, 0] = eps * _E0
    slack = sigma.reshape(-1, 3, 3) - (nlam / 3.0) * eps * np.eye(3)
    x0[nlam:] = herm_to_vec(slack)
    return x0


def steering_weight(sigma: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = 100) -> float:
    """``1 - max Tr(sum sigma~_lam)`` over ``sum_lam D sigma~_lam <= sigma[x,a]``, ``sigma~ >= 0``."""
    sigma = np.asarray(sigma, dtype=np.complex128)
    measure.check_assemblage(sigma, tol=max(tol, 1e-10))
    table = enumerate_strategies(sigma.shape[0])
    problem = WeightProblem(table, sigma)
    res = ipm.solve(problem, x0=_weight_start(problem, sigma), tol=min(tol, 1e-9), max_iter=max_iter)
    st = res.state
    if res.status != "optimal" and not (st.pinf < 1e-6 and st.gap < 1e-6):
        raise SolverStalled(f"steering weight did not converge ({res.status})")
    sw = 1.0 + 0.5 * (st.pobj + st.dobj)
    return float(min(1.0, max(0.0, sw)))


@dataclass
class LabelResult:
    label: int
    trials_run: int
    stalled: int
    steerable_trial: int | None = None
    value: float | None = None
    verdict: SteeringVerdict | None = None  # certifying verdict, or the last one


def sdp_label(
    rho: np.ndarray,
    m: int,
    trials: int,
    rng: np.random.Generator,
    tol: float = DEFAULT_TOL,
    measurements=None,
    log_file=None,
    seed_tag=None,
) -> LabelResult:
    """Label ``rho`` -1 on the first verified steering certificate, else +1.

    Each trial draws ``m`` spin-1 directions from ``rng`` (or uses a
    supplied ``measurements(trial)`` callable). A stalled solve counts as
    no certificate. ``+1`` means no certificate was found, not that the
    state is unsteerable.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stalled = 0
    verdict = None
    for k in range(trials):
        ms = measurements(k) if measurements is not None else measure.random_spin_measurements(rng, m)
        ms = np.asarray(ms)
        sigma = measure.build_assemblage(rho, ms)
        try:
            verdict = lhs_feasibility(sigma, tol=tol)
        except SolverStalled as exc:
            stalled += 1
            log.info("stalled solve (trial %d): %s", k, exc)
            verdict = None
        if log_file is not None:
            log_file.write(json.dumps({
                "m": int(ms.shape[0]), "seed": seed_tag, "trial": k,
                "verdict": verdict.kind if verdict else "STALLED",
                "v": verdict.certificate.value if verdict and verdict.certificate else None,
                "t_upper": verdict.stats.get("t_upper") if verdict else None,
                "pinf": verdict.stats.get("pinf") if verdict else None,
            }) + "\n")
        if verdict is not None and verdict.steerable:
            return LabelResult(-1, k + 1, stalled, k, verdict.certificate.value, verdict)
    return LabelResult(1, trials, stalled, verdict=verdict)
