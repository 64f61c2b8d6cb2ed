"""
Kolmogorov N-width bounds for finite snapshot sets.

Lower bounds come from two certificates: the pigeonhole count for
orthonormal families (pushed onto the wave manifold through the hat-function
packing) and the spectral dual, which for any probability weights bounds the
worst case from below by the weighted mean-square optimum. The upper bound is
the sup residual of an explicit witness subspace found by multiplicative
weights over weighted POD subspaces. When the restarts leave a gap, the best
witness is refined by SLSQP on the epigraph form of the minimax problem.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from config import DEFAULT_MINIMAX_CONFIG, MinimaxConfig
from errors import InvalidParameterError, WidthError
from geometry import (
    GramMatrix,
    Subspace,
    all_residuals,
    assemble_gram,
    g_extend,
    gram_factor,
    pod_subspace,
    subspace_from_coordinates,
    sup_residual,
    symmetric_eig,
    weighted_gram,
    weighted_pod_subspace,
)
from manifold import HatFunction, WaveSnapshot
from nodes.logger_node import logger
from state import BOUND_SLACK, ChainReport, SubspaceDescriptor, WidthEstimate

CHAIN_TOL = 1e-14
EXACTNESS_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-9
EPS = float(np.finfo(float).eps)
AVERAGE_EVERY = 10
REFINE_PERTURBATION = 0.1
STALL_SHRINK = 0.01


# Orthonormal families

def exact_width_orthonormal(k: int, N: int) -> float:
    """Width of any orthonormal set of size kN: sqrt((k - 1) / k)."""
    if k < 1 or N < 1:
        raise InvalidParameterError(f"k={k} and N={N} must both be at least 1")
    return math.sqrt((k - 1) / k)


class PigeonholeBound(NamedTuple):
    value: float
    degenerate: bool


def pigeonhole_lower_bound(S: int, N: int) -> PigeonholeBound:
    """Some member of an orthonormal S-set keeps residual >= sqrt(1 - N/S)."""
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    if S <= N:
        return PigeonholeBound(0.0, True)
    return PigeonholeBound(math.sqrt(1.0 - N / S), False)


def identity_gram(size: int) -> GramMatrix:
    return GramMatrix(entries=np.eye(size), labels=[f"e[{i + 1}]" for i in range(size)])


def k_fold_pairing_subspace(k: int, N: int, gram: Optional[GramMatrix] = None) -> Subspace:
    """d_j = (e_{k(j-1)+1} + ... + e_{kj}) / sqrt(k) for j = 1..N."""
    if k < 1 or N < 1:
        raise InvalidParameterError(f"k={k} and N={N} must both be at least 1")
    gram = gram if gram is not None else identity_gram(k * N)
    if gram.size != k * N:
        raise InvalidParameterError(f"pairing needs {k * N} snapshots, Gram has {gram.size}")
    coeffs = np.zeros((k * N, N))
    for j in range(N):
        coeffs[k * j:k * (j + 1), j] = 1.0 / math.sqrt(k)
    return Subspace(coeffs=coeffs, gram=gram)


def pairing_subspace(N: int, gram: Optional[GramMatrix] = None) -> Subspace:
    return k_fold_pairing_subspace(2, N, gram)


# Hat-function packing

def hat_family_width(M: int, N: int) -> float:
    """Exact d_N of {psi_{M,m}}: M orthogonal functions of norm 1/sqrt(M)."""
    if M < 1 or N < 1:
        raise InvalidParameterError(f"M={M} and N={N} must both be at least 1")
    if M <= N:
        return 0.0
    return math.sqrt(M - N) / M


def optimal_hat_count(N: int) -> int:
    """Hat count M maximizing the packing width; equals 2N."""
    return max(range(N + 1, 4 * N + 1), key=lambda M: hat_family_width(M, N))


def _packing_chain(N: int) -> Tuple[float, float]:
    """Walk the packing argument numerically; returns (bound, width of the orthonormal hats)."""
    M = optimal_hat_count(N)
    gram = assemble_gram([HatFunction.orthonormal(M, m) for m in range(1, M + 1)])
    psi_tilde_width, _ = sup_residual(gram, k_fold_pairing_subspace(M // N, N, gram))

    # the pairing subspace attains the pigeonhole bound, so this is the width itself
    floor = pigeonhole_lower_bound(M, N).value
    if abs(psi_tilde_width - floor) > EXACTNESS_TOL:
        raise WidthError(f"pairing residual {psi_tilde_width!r} misses the pigeonhole bound {floor!r}")

    psi_width = psi_tilde_width / math.sqrt(M)
    return 0.5 * psi_width, psi_tilde_width


def packing_lower_bound(N: int) -> float:
    """d_N of the wave manifold is at least 1/(4 sqrt(N))."""
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    bound, _ = _packing_chain(N)
    if abs(bound - 0.25 / math.sqrt(N)) > CHAIN_TOL:
        raise WidthError(f"packing chain gives {bound!r}, expected 0.25/sqrt({N})")
    return bound


def packing_lower_bound_for_grid(N: int, grid_size: int) -> Optional[Tuple[float, int]]:
    """Best packing bound from hat families whose wave grid is inside a uniform grid.

    A grid of ``grid_size`` points on [0, 1] contains {m/M} whenever M divides
    grid_size - 1; each such M > N certifies half the hat-family width.
    """
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    intervals = grid_size - 1
    candidates = [M for M in range(N + 1, intervals + 1) if intervals % M == 0]
    if not candidates:
        return None
    M = max(candidates, key=lambda M: hat_family_width(M, N))
    if M == 2 * N:
        return packing_lower_bound(N), M
    return 0.5 * hat_family_width(M, N), M


# Spectral dual

def certified_tail(eigenvalues: np.ndarray, N: int) -> float:
    """Eigenvalue tail beyond N minus the rounding allowance of the eigensolver."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    S = lam.size
    if N >= S or S == 0:
        return 0.0
    tail = math.fsum(lam[N:])
    allowance = (S - N) * 4.0 * S * EPS * float(lam[0])
    return max(tail - allowance, 0.0)


def _validate_weights(weights: np.ndarray, size: int) -> Dict[str, object]:
    if weights.shape != (size,):
        return {"valid": False, "reason": f"expected {size} weights, got shape {weights.shape}"}
    if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
        return {"valid": False, "reason": "weights must be finite and nonnegative"}
    if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
        return {"valid": False, "reason": f"weights sum to {float(weights.sum())!r}, not 1"}
    return {"valid": True, "reason": ""}


def dual_lower_bound(gram: GramMatrix, N: int, weights: Sequence[float]) -> float:
    """sqrt of the certified eigenvalue tail of D^{1/2} G D^{1/2}."""
    weights = np.asarray(weights, dtype=float)
    validation = _validate_weights(weights, gram.size)
    if not validation["valid"]:
        raise InvalidParameterError(validation["reason"])
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    if N >= gram.size:
        return 0.0
    spectrum = symmetric_eig(weighted_gram(gram, weights))
    return math.sqrt(certified_tail(spectrum.eigenvalues, N))


def uniform_dual_lower_bound(gram: GramMatrix, N: int) -> float:
    return dual_lower_bound(gram, N, np.full(gram.size, 1.0 / gram.size))


# Minimax search

class _RestartResult(NamedTuple):
    restart: int
    upper: float
    coeffs: np.ndarray
    source: str
    iteration: int
    lower: float
    lower_source: str
    iterations: int
    stop_reason: str
    converged: bool


def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, restart])))


def _softmax(log_weights: np.ndarray) -> np.ndarray:
    w = np.exp(log_weights - np.max(log_weights))
    return w / w.sum()


def _extend_basis(gram: GramMatrix, coeffs: np.ndarray, N: int) -> np.ndarray:
    """Add the worst-approximated snapshot until the basis has N columns."""
    basis = coeffs[:, :N]
    while basis.shape[1] < N:
        squared = gram.diagonal - np.sum((basis.T @ gram.entries) ** 2, axis=0)
        k = int(np.argmax(squared))
        unit = g_extend(basis, np.eye(gram.size)[:, k], gram)
        if unit is None:
            break
        basis = np.column_stack([basis, unit])
    return basis


def _refine(gram: GramMatrix, factor: np.ndarray, N: int, coeffs: np.ndarray,
            rng: np.random.Generator, max_iterations: int) -> Optional[np.ndarray]:
    """SLSQP on min s subject to s >= r_i(Y)^2, Y in the coordinates of ``factor``."""
    r, S = factor.shape
    if r <= N:
        return None
    start = factor @ coeffs
    if start.shape[1] < N:
        start = np.column_stack([start, rng.standard_normal((r, N - start.shape[1]))])
    start, _ = np.linalg.qr(start + REFINE_PERTURBATION * rng.standard_normal((r, N)))

    def project(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        Y = z[:-1].reshape(r, N)
        K = factor.T @ Y @ np.linalg.pinv(Y.T @ Y)
        return factor - Y @ K.T, K

    def slack(z: np.ndarray) -> np.ndarray:
        E, _ = project(z)
        return z[-1] - np.sum(E * E, axis=0)

    def slack_jacobian(z: np.ndarray) -> np.ndarray:
        E, K = project(z)
        jac = np.empty((S, r * N + 1))
        jac[:, :-1] = 2.0 * np.einsum("ri,in->irn", E, K).reshape(S, r * N)
        jac[:, -1] = 1.0
        return jac

    last = np.zeros(r * N + 1)
    last[-1] = 1.0
    z0 = np.append(start.ravel(), 0.0)
    z0[-1] = float(np.max(-slack(z0)))

    try:
        result = minimize(
            lambda z: z[-1], z0, jac=lambda z: last, method="SLSQP",
            constraints=[{"type": "ineq", "fun": slack, "jac": slack_jacobian}],
            options={"maxiter": max_iterations, "ftol": 1e-15},
        )
        Y = result.x[:-1].reshape(r, N)
        if not np.all(np.isfinite(Y)):
            return None
        U, R = np.linalg.qr(Y)
        if np.min(np.abs(np.diag(R))) < 1e-12 * np.max(np.abs(np.diag(R))):
            return None
        return subspace_from_coordinates(gram, U).coeffs
    except (ValueError, np.linalg.LinAlgError, WidthError) as e:
        logger.log_event("REFINE_FAILED", {"N": N, "error": str(e)}, stage="widths")
        return None


def _run_restart(gram: GramMatrix, N: int, config: MinimaxConfig, restart: int,
                 seeds: List[Tuple[np.ndarray, str]]) -> _RestartResult:
    rng = _restart_rng(config.seed, restart)
    S = gram.size
    tol = config.convergence_tol
    log_weights = np.zeros(S) if restart == 0 else config.perturbation * rng.standard_normal(S)
    w = _softmax(log_weights)

    best_upper, best_coeffs, source, best_iteration = math.inf, np.zeros((S, 0)), "none", -1
    for coeffs, seed_source in seeds:
        upper = float(np.max(all_residuals(gram, Subspace(coeffs=coeffs, gram=gram))))
        if upper < best_upper:
            best_upper, best_coeffs, source = upper, coeffs, seed_source

    best_lower, lower_source = 0.0, "none"
    basis = None
    weight_sum = np.zeros(S)
    gaps: List[float] = []
    stop_reason = "budget"
    iteration = 0
    for iteration in range(config.max_iterations):
        subspace, spectrum = weighted_pod_subspace(gram, N, w, initial=basis)
        basis = spectrum.eigenvectors
        residuals = all_residuals(gram, subspace)

        upper = float(np.max(residuals))
        if upper < best_upper:
            label = "pod" if restart == 0 and iteration == 0 else "weighted_pod"
            best_upper, best_coeffs, source, best_iteration = upper, subspace.coeffs, label, iteration

        lower = math.sqrt(certified_tail(spectrum.eigenvalues, N))
        if lower > best_lower:
            best_lower, lower_source = lower, f"weights (restart {restart}, iteration {iteration})"

        weight_sum += w
        if (iteration + 1) % AVERAGE_EVERY == 0:
            averaged = weight_sum / (iteration + 1)
            averaged_spectrum = symmetric_eig(weighted_gram(gram, averaged), initial=basis)
            lower = math.sqrt(certified_tail(averaged_spectrum.eigenvalues, N))
            if lower > best_lower:
                best_lower, lower_source = lower, f"averaged weights (restart {restart}, iteration {iteration})"

        gap = best_upper - best_lower
        if gap <= max(tol, config.gap_tol * best_upper):
            stop_reason = "gap"
            break
        gaps.append(gap)
        # the gap must shrink by STALL_SHRINK over every window of `patience` iterations
        if len(gaps) > config.patience and gap > (1.0 - STALL_SHRINK) * gaps[-1 - config.patience]:
            stop_reason = "stalled"
            break

        # residuals are relative to the largest snapshot norm
        log_weights = log_weights + config.weight_learning_rate * residuals ** 2
        updated = _softmax(log_weights)
        if float(np.abs(updated - w).sum()) < tol:
            stop_reason = "stationary"
            break
        w = updated

    logger.log_event("MINIMAX_RESTART", {
        "N": N,
        "restart": restart,
        "upper": best_upper,
        "lower_dual": best_lower,
        "iterations": iteration + 1,
        "stop_reason": stop_reason,
    }, stage="widths")
    return _RestartResult(
        restart=restart, upper=best_upper, coeffs=best_coeffs, source=source, iteration=best_iteration,
        lower=best_lower, lower_source=lower_source, iterations=iteration + 1,
        stop_reason=stop_reason, converged=stop_reason != "budget",
    )


def _descriptor(witness: Subspace, source: str, restart: Optional[int] = None,
                iteration: Optional[int] = None) -> SubspaceDescriptor:
    return SubspaceDescriptor(
        dim=witness.dim, source=source, restart=restart, iteration=iteration,
        coeffs=witness.coeffs.tolist(),
    )


def witness_subspace(gram: GramMatrix, estimate: WidthEstimate) -> Subspace:
    """Rebuild the witness subspace of an estimate against ``gram``."""
    if estimate.upper_witness is None:
        return Subspace.empty(gram)
    coeffs = np.array(estimate.upper_witness.coeffs, dtype=float).reshape(gram.size, estimate.upper_witness.dim)
    return Subspace(coeffs=coeffs, gram=gram)


def minimax_width(gram: GramMatrix, N: int, config: Optional[MinimaxConfig] = None,
                  warm_start: Optional[Subspace] = None) -> WidthEstimate:
    """Numerical bounds on d_N of the snapshot set behind ``gram``.

    The search runs on the Gram matrix divided by its largest diagonal entry,
    so scaling every snapshot by c scales every bound by c.
    """
    config = config or DEFAULT_MINIMAX_CONFIG
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    if warm_start is not None and warm_start.gram.size != gram.size:
        raise InvalidParameterError("warm start belongs to a different snapshot set")

    scale2 = float(np.max(gram.diagonal))
    if scale2 <= 0.0:
        empty = Subspace.empty(gram)
        return WidthEstimate(N=N, upper_witness=_descriptor(empty, "full_range"), converged=True,
                             stop_reason="zero_snapshots")
    scale = math.sqrt(scale2)
    normalized = GramMatrix(entries=gram.entries / scale2, labels=gram.labels, family=gram.family)

    rank = normalized.rank()
    if N >= rank:
        witness = Subspace(coeffs=pod_subspace(normalized, rank).coeffs / scale, gram=gram)
        upper, _ = sup_residual(gram, witness)
        estimate = WidthEstimate(
            N=N, lower_dual=0.0, upper=upper, upper_witness=_descriptor(witness, "full_range"),
            converged=True, stop_reason="full_range",
            provenance={"upper": f"span of all {rank} numerically independent directions",
                        "lower_dual": "no eigenvalue tail"},
        )
        logger.log_width_estimate(N, estimate.lower_dual, estimate.upper, True)
        return estimate

    seeds: List[Tuple[np.ndarray, str]] = []
    if warm_start is not None:
        seeds.append((_extend_basis(normalized, warm_start.coeffs * scale, N), "warm_start"))

    workers = config.threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=min(workers, config.restarts)) as pool:
        results = list(pool.map(
            lambda restart: _run_restart(normalized, N, config, restart, seeds),
            range(config.restarts),
        ))

    best = min(results, key=lambda res: (res.upper, res.restart))
    best_lower = max(results, key=lambda res: (res.lower, -res.restart))
    coeffs, source = best.coeffs, best.source
    gap_closed = best.upper - best_lower.lower <= max(config.convergence_tol, config.gap_tol * best.upper)

    # one SLSQP pass on the best witness when the restarts left a gap; its stream follows the restarts'
    if config.refine_iterations and not gap_closed:
        factor, _ = gram_factor(normalized)
        refined = _refine(normalized, factor, N, best.coeffs, _restart_rng(config.seed, config.restarts),
                          config.refine_iterations)
        if refined is not None:
            if float(np.max(all_residuals(normalized, Subspace(coeffs=refined, gram=normalized)))) < best.upper:
                coeffs, source = refined, "refined"

    witness = Subspace(coeffs=coeffs / scale, gram=gram)
    upper, _ = sup_residual(gram, witness)
    converged = gap_closed or any(res.converged for res in results)

    estimate = WidthEstimate(
        N=N,
        lower_dual=best_lower.lower * scale,
        upper=upper,
        upper_witness=_descriptor(witness, source, best.restart, best.iteration),
        iterations=sum(res.iterations for res in results),
        converged=converged,
        stop_reason=best.stop_reason,
        provenance={
            "upper": f"{source} subspace (restart {best.restart}, iteration {best.iteration})",
            "lower_dual": best_lower.lower_source,
        },
    )
    logger.log_width_estimate(N, estimate.lower_dual, estimate.upper, converged)
    if not converged:
        logger.log_event("MINIMAX_NOT_CONVERGED", {
            "N": N,
            "gap": estimate.upper - estimate.lower_dual,
            "iterations": estimate.iterations,
        }, stage="widths")
    return estimate


def best_dual_lower_bound(gram: GramMatrix, N: int, config: Optional[MinimaxConfig] = None) -> float:
    """Weights ascent without subspace refinement; returns the best certified dual bound."""
    config = (config or DEFAULT_MINIMAX_CONFIG).model_copy(update={"refine_iterations": 0})
    return minimax_width(gram, N, config).lower_dual


def width_profile(gram: GramMatrix, n_list: Sequence[int],
                  config: Optional[MinimaxConfig] = None) -> List[WidthEstimate]:
    """Estimates for several N, monotone in N.

    Each N starts from the previous witness extended by the worst snapshot,
    so upper(N) never exceeds upper of a smaller N. A certified lower bound
    for a larger N also bounds every smaller N from below and is carried down.
    """
    ordered = sorted(set(n_list))
    estimates: Dict[int, WidthEstimate] = {}
    previous: Optional[Subspace] = None
    for N in ordered:
        estimates[N] = minimax_width(gram, N, config, warm_start=previous)
        previous = witness_subspace(gram, estimates[N])

    for smaller, larger in reversed(list(zip(ordered[:-1], ordered[1:]))):
        inherited = estimates[larger].lower_dual
        if inherited > estimates[smaller].lower_dual:
            provenance = dict(estimates[smaller].provenance)
            provenance["lower_dual"] = f"carried down from N={larger}"
            estimates[smaller] = estimates[smaller].model_copy(
                update={"lower_dual": inherited, "provenance": provenance}
            )
    return [estimates[N] for N in n_list]


# Packing chain check

def chain_check(M_grid: int, N: int, config: Optional[MinimaxConfig] = None,
                numerical: bool = True) -> ChainReport:
    """Reproduce d_N(M) >= d_N(Phi_M) >= d_N(Psi_M) / 2 for M = 2N."""
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    if M_grid != 2 * N:
        raise InvalidParameterError(f"the packing chain uses M = 2N = {2 * N}, got {M_grid}")

    chain_value, psi_tilde_width = _packing_chain(N)
    target = 0.25 / math.sqrt(N)
    report = ChainReport(
        N=N, M_grid=M_grid, packing_bound=target, chain_value=chain_value,
        chain_verified=abs(chain_value - target) <= CHAIN_TOL,
        psi_tilde_width=psi_tilde_width,
    )
    if not numerical:
        return report

    phi_gram = assemble_gram([WaveSnapshot(mu=m / M_grid) for m in range(M_grid + 1)])
    psi_gram = assemble_gram([HatFunction(M=M_grid, m=m) for m in range(1, M_grid + 1)])
    phi_estimate = minimax_width(phi_gram, N, config)
    psi_estimate = minimax_width(psi_gram, N, config)

    ordering = (
        phi_estimate.upper >= 0.5 * psi_estimate.lower_dual - BOUND_SLACK
        and phi_estimate.upper >= chain_value - BOUND_SLACK
        and psi_estimate.lower_dual <= hat_family_width(M_grid, N) + BOUND_SLACK
        and phi_estimate.bounds_consistent()
        and psi_estimate.bounds_consistent()
    )
    return report.model_copy(update={
        "phi_estimate": phi_estimate,
        "psi_estimate": psi_estimate,
        "numerical_ordering_holds": ordering,
    })
