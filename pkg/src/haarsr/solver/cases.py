"""Recover the reference detail subbands from an observation set.

Every solver works on one block and treats the shift operators as square,
i.e. the scene outside the block is zero (or has already been subtracted
from the observations, see :mod:`haarsr.pipeline`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon
from scipy.sparse.linalg import splu

from ..errors import (
    BlockTooLargeError,
    IllPosedConfigurationError,
    SingularOperatorError,
    UnsupportedConfigurationError,
    ZeroMatrixError,
)
from ..haar import HaarPyramid1
from ..imaging import Case, ObservationSet, classify_case
from ..shiftop import (
    DyadicShift,
    ShiftOperators,
    build_operators,
    inband_shift,
    shift_direction,
    solve_left,
    solve_right,
)
from .tsvd import TsvdConfig, TruncatedPinv, factor

# Dense mn x mn matrices held at once while building a Case-4 plan.
CASE4_DENSE_MATRICES = 12
MEMORY_BUDGET_BYTES = 1 << 30


@dataclass
class DetailEstimate:
    """Estimated ``H``, ``V``, ``D`` of the reference HR image.

    ``residuals`` holds, per observation, the max-abs misfit of the forward
    model on interior pixels (outermost ring excluded).  The last row and
    column are always untrusted; ``extrapolated`` records whether
    :func:`extrapolate_boundary` has replaced them.
    """

    H: np.ndarray
    V: np.ndarray
    D: np.ndarray
    case: Case
    rank_used: dict[str, int] = field(default_factory=dict)
    residuals: tuple[float, ...] = ()
    extrapolated: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.H.shape

    def pyramid(self, A: np.ndarray) -> HaarPyramid1:
        return HaarPyramid1(A, self.H, self.V, self.D)

    def untrusted_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[-1, :] = True
        mask[:, -1] = True
        return mask


def _ops(obs: ObservationSet) -> list[ShiftOperators]:
    m, n = obs.shape
    return [build_operators(s, m, n) for s in obs.shifts]


def observation_residuals(obs: ObservationSet, H, V, D) -> tuple[float, ...]:
    pyr = HaarPyramid1(obs.reference, H, V, D)
    out = []
    for shift, ops, img in zip(obs.shifts, _ops(obs), obs.shifted):
        pred = inband_shift(pyr, ops, shift_direction(shift))
        diff = np.abs(pred - img)[1:-1, 1:-1]
        out.append(float(diff.max()) if diff.size else 0.0)
    return tuple(out)


def _roles(obs: ObservationSet) -> dict[str, list[int]]:
    roles: dict[str, list[int]] = {"horizontal": [], "vertical": [], "diagonal": []}
    for i, s in enumerate(obs.shifts):
        if s.kind == "none":
            raise UnsupportedConfigurationError(f"observation {i} has no displacement")
        roles[s.kind].append(i)
    return roles


def _solve_pure(obs: ObservationSet, idx: int, ops: ShiftOperators) -> np.ndarray:
    """Detail subband from a purely horizontal or vertical observation."""
    A = obs.reference
    if obs.shifts[idx].kind == "horizontal":
        return solve_right(obs.shifted[idx] - A @ ops.F_h, ops.K_h)
    return solve_left(ops.K_v, obs.shifted[idx] - ops.F_v @ A)


def solve_case1(obs: ObservationSet) -> DetailEstimate:
    """H from the horizontal frame, V from the vertical, then D from the diagonal."""
    roles = _roles(obs)
    if [len(roles[k]) for k in ("horizontal", "vertical", "diagonal")] != [1, 1, 1]:
        raise UnsupportedConfigurationError("case 1 needs one horizontal, one vertical, one diagonal shift")
    ops = _ops(obs)
    ih, iv, i_d = roles["horizontal"][0], roles["vertical"][0], roles["diagonal"][0]
    try:
        H = _solve_pure(obs, ih, ops[ih])
        V = _solve_pure(obs, iv, ops[iv])
        od = ops[i_d]
        A = obs.reference
        rest = obs.shifted[i_d] - od.F_v @ A @ od.F_h - od.F_v @ H @ od.K_h - od.K_v @ V @ od.F_h
        D = solve_right(solve_left(od.K_v, rest), od.K_h)
    except SingularOperatorError as exc:
        raise SingularOperatorError(f"case 1: {exc}") from exc
    return DetailEstimate(H, V, D, Case.CASE1, residuals=observation_residuals(obs, H, V, D))


def alpha_matrix(k_h1: np.ndarray, k_h2: np.ndarray, s1: DyadicShift, s2: DyadicShift) -> np.ndarray | float:
    """``K_h2^{-1} K_h1``; a plain scalar when both shifts share sign and level structure."""
    if np.sign(s1.s_x) == np.sign(s2.s_x):
        return s1.dx / s2.dx
    return solve_left(k_h2, k_h1)


def solve_case23(obs: ObservationSet, tsvd: TsvdConfig = TsvdConfig()) -> DetailEstimate:
    """One pure shift plus two diagonal shifts.

    Case 3 (vertical + two diagonal) is solved as Case 2 of the transposed
    problem; transposing an image swaps its ``H`` and ``V`` subbands.
    """
    case = classify_case(obs)
    if case == Case.CASE3:
        est = solve_case23(obs.transposed(), tsvd)
        H, V, D = est.V.T, est.H.T, est.D.T
        ranks = {"H": est.rank_used["V"]}
        return DetailEstimate(H, V, D, Case.CASE3, ranks, observation_residuals(obs, H, V, D))
    if case != Case.CASE2:
        raise UnsupportedConfigurationError(f"solve_case23 cannot handle {case.name}")

    roles = _roles(obs)
    ops = _ops(obs)
    ih = roles["horizontal"][0]
    i1, i2 = roles["diagonal"]
    s1, s2 = obs.shifts[i1], obs.shifts[i2]
    o1, o2 = ops[i1], ops[i2]
    A = obs.reference

    H = _solve_pure(obs, ih, ops[ih])
    S = obs.shifted[i1] - o1.F_v @ A @ o1.F_h - o1.F_v @ H @ o1.K_h
    T = obs.shifted[i2] - o2.F_v @ A @ o2.F_h - o2.F_v @ H @ o2.K_h

    alpha = alpha_matrix(o1.K_h, o2.K_h, s1, s2)
    X = o1.F_h - o2.F_h @ alpha if np.ndim(alpha) else o1.F_h - alpha * o2.F_h
    kv1_s = solve_left(o1.K_v, S)
    kv2_t = solve_left(o2.K_v, T)
    rhs = kv1_s - (kv2_t @ alpha if np.ndim(alpha) else alpha * kv2_t)
    # V X = rhs  <=>  X^T V^T = rhs^T
    try:
        pinv = factor(X.T, tsvd)
    except ZeroMatrixError as exc:
        raise IllPosedConfigurationError(
            f"diagonal shifts {s1} and {s2} give a degenerate system for V"
        ) from exc
    V = pinv.apply(rhs.T).T
    D = solve_right(kv1_s - V @ o1.F_h, o1.K_h)
    return DetailEstimate(
        H, V, D, Case.CASE2, {"V": pinv.rank}, observation_residuals(obs, H, V, D)
    )


# -- case 4 ---------------------------------------------------------------------

def _kron_blocks(ops: ShiftOperators):
    """FF, FK, KF, KK for row-major vectorization: vec(L X R) = (L kron R^T) vec(X)."""
    return (
        np.kron(ops.F_v, ops.F_h.T),
        np.kron(ops.F_v, ops.K_h.T),
        np.kron(ops.K_v, ops.F_h.T),
        np.kron(ops.K_v, ops.K_h.T),
    )


def _kk_ratio(oi: ShiftOperators, oj: ShiftOperators) -> np.ndarray:
    """``KK_i KK_j^{-1}`` via its Kronecker factors."""
    pv = solve_right(oi.K_v, oj.K_v)  # K_vi K_vj^{-1}
    ph = solve_left(oj.K_h, oi.K_h).T  # K_hi^T K_hj^{-T}
    return np.kron(pv, ph)


def _rcond(lu_piv, mat: np.ndarray) -> float:
    anorm = np.abs(mat).sum(axis=0).max()
    rcond, _ = dgecon(lu_piv[0], anorm, norm="1")
    return float(rcond)


@dataclass(frozen=True)
class Case4Plan:
    """Precomputed linear maps for one shift triple and block shape.

    ``h`` comes from the truncated pseudo-inverse of
    ``X = Y_1 - W_1 W_2^{-1} Y_2``; ``v`` and ``d`` follow by substitution.
    All blocks sharing shifts and shape reuse one plan.
    """

    shape: tuple[int, int]
    order: tuple[int, int, int]
    ops: tuple[ShiftOperators, ...]
    pinv: TruncatedPinv
    h_maps: tuple[np.ndarray, ...]
    v_maps: tuple[np.ndarray, ...]
    v_from_h: np.ndarray

    @property
    def rank(self) -> int:
        return self.pinv.rank

    def solve_many(self, refs: np.ndarray, observed: np.ndarray):
        """Solve a stack of blocks.

        ``refs`` is ``(T, m, n)`` and ``observed`` is ``(3, T, m, n)`` in the
        original observation order.  Returns ``(H, V, D)`` stacks.
        """
        m, n = self.shape
        count = refs.shape[0]
        a = refs.reshape(count, m * n).T
        ad = [observed[i].reshape(count, m * n).T for i in self.order]
        rhs = self.h_maps[0] @ a + self.h_maps[1] @ ad[0] + self.h_maps[2] @ ad[1] + self.h_maps[3] @ ad[2]
        h = self.pinv.apply(rhs)
        v = self.v_maps[0] @ a + self.v_maps[1] @ ad[1] + self.v_maps[2] @ ad[2] + self.v_from_h @ h
        H = h.T.reshape(count, m, n)
        V = v.T.reshape(count, m, n)
        o1 = self.ops[0]
        D = np.empty_like(H)
        for t in range(count):
            A = refs[t]
            rest = (
                observed[self.order[0], t]
                - o1.F_v @ A @ o1.F_h
                - o1.F_v @ H[t] @ o1.K_h
                - o1.K_v @ V[t] @ o1.F_h
            )
            D[t] = solve_right(solve_left(o1.K_v, rest), o1.K_h)
        return H, V, D


def case4_memory_bytes(m: int, n: int) -> int:
    return CASE4_DENSE_MATRICES * (m * n) ** 2 * 8


def _build_case4_plan(
    shifts: tuple[DyadicShift, ...], m: int, n: int, tsvd: TsvdConfig, memory_budget: int
) -> Case4Plan:
    need = case4_memory_bytes(m, n)
    if need > memory_budget:
        raise BlockTooLargeError(
            f"{m}x{n} block needs ~{need / 2**20:.0f} MiB for the vectorized system "
            f"(budget {memory_budget / 2**20:.0f} MiB); use a smaller block size"
        )
    ops_all = [build_operators(s, m, n) for s in shifts]
    best = None
    # The elimination pairs observations (1,2) and (2,3); pick the ordering
    # whose W_2 is best conditioned.
    for order in ((0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (1, 0, 2), (2, 1, 0)):
        o = [ops_all[i] for i in order]
        blocks = [_kron_blocks(x) for x in o]
        M1 = _kk_ratio(o[0], o[1])
        M2 = _kk_ratio(o[1], o[2])
        FF, FK, KF, _ = zip(*blocks)
        W1 = KF[0] - M1 @ KF[1]
        W2 = KF[1] - M2 @ KF[2]
        with warnings.catch_warnings():
            # a singular W_2 is expected for some orderings; rcond reports it
            warnings.simplefilter("ignore", LinAlgWarning)
            lu = lu_factor(W2, check_finite=False)
        rc = _rcond(lu, W2)
        if best is None or rc > best[0]:
            best = (rc, order, o, FF, FK, KF, M1, M2, W1, lu)
        if rc > 1e-6:
            break
    rc, order, o, FF, FK, KF, M1, M2, W1, lu = best
    if not rc > 1e-13:
        raise IllPosedConfigurationError(f"no observation ordering gives an invertible W for shifts {shifts}")

    Y1 = FK[0] - M1 @ FK[1]
    Y2 = FK[1] - M2 @ FK[2]
    G1 = FF[0] - M1 @ FF[1]
    G2 = FF[1] - M2 @ FF[2]
    # Z_i = a_di - M_i a_d(i+1) - G_i a;  X h = Z_1 - W_1 W_2^{-1} Z_2
    w2_inv_y2 = lu_solve(lu, Y2, check_finite=False)
    w2_inv_g2 = lu_solve(lu, G2, check_finite=False)
    w2_inv_m2 = lu_solve(lu, M2, check_finite=False)
    w2_inv = lu_solve(lu, np.eye(m * n), check_finite=False)
    X = Y1 - W1 @ w2_inv_y2
    try:
        pinv = factor(X, tsvd)
    except ZeroMatrixError as exc:
        raise IllPosedConfigurationError(f"shifts {shifts} give a degenerate system for H") from exc
    W1_w2inv = W1 @ w2_inv
    h_maps = (
        -(G1 - W1 @ w2_inv_g2),  # a
        np.eye(m * n),  # a_d1
        -(M1 + W1_w2inv),  # a_d2
        W1 @ w2_inv_m2,  # a_d3
    )
    # v = W_2^{-1} (Z_2 - Y_2 h)
    v_maps = (-w2_inv_g2, w2_inv, -w2_inv_m2)
    return Case4Plan(
        shape=(m, n),
        order=order,
        ops=tuple(o),
        pinv=pinv,
        h_maps=h_maps,
        v_maps=v_maps,
        v_from_h=-w2_inv_y2,
    )


@lru_cache(maxsize=8)
def case4_plan(
    shifts: tuple[DyadicShift, ...],
    m: int,
    n: int,
    tsvd: TsvdConfig = TsvdConfig(),
    memory_budget: int = MEMORY_BUDGET_BYTES,
) -> Case4Plan:
    return _build_case4_plan(tuple(shifts), m, n, tsvd, memory_budget)


def solve_case4(
    obs: ObservationSet,
    tsvd: TsvdConfig = TsvdConfig(),
    memory_budget: int = MEMORY_BUDGET_BYTES,
) -> DetailEstimate:
    if classify_case(obs) != Case.CASE4:
        raise UnsupportedConfigurationError("solve_case4 needs three diagonal shifts")
    m, n = obs.shape
    plan = case4_plan(tuple(obs.shifts), m, n, tsvd, memory_budget)
    H, V, D = plan.solve_many(obs.reference[None], np.stack(obs.shifted)[:, None])
    H, V, D = H[0], V[0], D[0]
    return DetailEstimate(
        H, V, D, Case.CASE4, {"H": plan.rank}, observation_residuals(obs, H, V, D)
    )


def solve(obs: ObservationSet, tsvd: TsvdConfig = TsvdConfig(), memory_budget: int = MEMORY_BUDGET_BYTES) -> DetailEstimate:
    """Dispatch to the solver for the observation set's case."""
    case = classify_case(obs)
    if case == Case.CASE1:
        return solve_case1(obs)
    if case in (Case.CASE2, Case.CASE3):
        return solve_case23(obs, tsvd)
    return solve_case4(obs, tsvd, memory_budget)


def extrapolate_boundary(est: DetailEstimate) -> DetailEstimate:
    """Replace the last row and column of every subband by linear extrapolation.

    ``x[-1] = 2 x[-2] - x[-3]``; with fewer than three samples along an axis
    the nearest value is copied instead.
    """

    def fix(band: np.ndarray) -> np.ndarray:
        out = band.copy()
        if out.shape[0] >= 3:
            out[-1, :] = 2 * out[-2, :] - out[-3, :]
        elif out.shape[0] == 2:
            out[-1, :] = out[-2, :]
        if out.shape[1] >= 3:
            out[:, -1] = 2 * out[:, -2] - out[:, -3]
        elif out.shape[1] == 2:
            out[:, -1] = out[:, -2]
        return out

    return replace(est, H=fix(est.H), V=fix(est.V), D=fix(est.D), extrapolated=True)


# -- whole frame ------------------------------------------------------------------

def stacked_system(shifts: Sequence[DyadicShift], m: int, n: int):
    """Sparse form of the three vectorized observation equations.

    Returns ``(M, M_a)`` with ``M`` acting on ``[h; v; d]`` and ``M_a`` on
    ``a`` (row-major vectors), so that ``M [h; v; d] = [a_d1; a_d2; a_d3] - M_a a``.
    """
    rows, arows = [], []
    for s in shifts:
        o = build_operators(s, m, n)
        fv, kv = sparse.csr_matrix(o.F_v), sparse.csr_matrix(o.K_v)
        fht, kht = sparse.csr_matrix(o.F_h.T), sparse.csr_matrix(o.K_h.T)
        rows.append([sparse.kron(fv, kht), sparse.kron(kv, fht), sparse.kron(kv, kht)])
        arows.append([sparse.kron(fv, fht)])
    return sparse.bmat(rows, format="csc"), sparse.bmat(arows, format="csr")


def solve_frame_sparse(obs: ObservationSet) -> DetailEstimate:
    """Direct sparse LU solve of all three observation equations jointly.

    Exact for consistent data of any case; used for frames too large for
    the dense vectorized system.
    """
    m, n = obs.shape
    M, Ma = stacked_system(obs.shifts, m, n)
    rhs = np.concatenate([o.ravel() for o in obs.shifted]) - Ma @ obs.reference.ravel()
    try:
        x = splu(M, permc_spec="COLAMD").solve(rhs)
    except RuntimeError as exc:
        raise IllPosedConfigurationError(f"shifts {list(obs.shifts)} give a singular frame system: {exc}") from exc
    except MemoryError as exc:
        raise BlockTooLargeError(f"sparse factorization of a {m}x{n} frame ran out of memory") from exc
    H, V, D = x.reshape(3, m, n)
    return DetailEstimate(H, V, D, classify_case(obs), residuals=observation_residuals(obs, H, V, D))


def solve_frame(obs: ObservationSet, tsvd: TsvdConfig = TsvdConfig()) -> DetailEstimate:
    """Whole-frame estimate: the case solver for cases 1-3, sparse LU for case 4."""
    case = classify_case(obs)
    if case == Case.CASE1:
        return solve_case1(obs)
    if case in (Case.CASE2, Case.CASE3):
        return solve_case23(obs, tsvd)
    return solve_frame_sparse(obs)


def identifiable(shifts: Sequence[DyadicShift], size: int = 12, cond_max: float = 1e10) -> bool:
    """Whether the three shifts determine the details uniquely.

    Checks the condition number of the stacked system on a small
    ``size x size`` block.  Degenerate triples (for instance two diagonal
    shifts with the same step along the pure shift's axis) are singular at
    every block size.
    """
    try:
        classify_case(shifts)
    except UnsupportedConfigurationError:
        return False
    M, _ = stacked_system(shifts, size, size)
    sigma = np.linalg.svd(M.toarray(), compute_uv=False)
    return bool(sigma[-1] > 0 and sigma[0] / sigma[-1] <= cond_max)
