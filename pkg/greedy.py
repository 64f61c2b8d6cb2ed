"""Strong greedy reduced bases and decay-rate diagnostics."""

import math
from typing import List, Optional, Sequence

import numpy as np

from errors import DecayFitError, InvalidParameterError
from geometry import GramMatrix, g_extend
from nodes.logger_node import logger
from state import DecayFit, DecayModel, GreedyTrace

BREAKDOWN_TOL = 1e-12
MIN_FIT_POINTS = 4


def strong_greedy(gram: GramMatrix, N_max: int, stop_tol: float = 0.0) -> GreedyTrace:
    """Select the worst-approximated snapshot N_max times.

    errors[0] is the largest snapshot norm; errors[n] is the sup residual
    after n selections. Ties go to the smallest index.
    """
    S = gram.size
    if N_max < 0 or N_max > S:
        raise InvalidParameterError(f"N_max={N_max} must lie in 0..{S}")
    if stop_tol < 0.0:
        raise InvalidParameterError(f"stop_tol={stop_tol} must be nonnegative")

    squared = gram.diagonal.copy()
    residuals = np.sqrt(np.clip(squared, 0.0, None))
    basis = np.zeros((S, 0))
    trace = GreedyTrace(N_max=N_max, errors=[float(residuals.max())], stop_reason="budget")

    for step in range(N_max):
        k = int(np.argmax(residuals))
        if residuals[k] < stop_tol:
            trace.converged, trace.stop_reason = True, "tolerance"
            break
        if residuals[k] < BREAKDOWN_TOL:
            trace.converged, trace.stop_reason = True, "breakdown"
            break
        unit = g_extend(basis, np.eye(S)[:, k], gram)
        if unit is None:
            trace.converged, trace.stop_reason = True, "breakdown"
            break
        basis = np.column_stack([basis, unit])

        squared -= (unit @ gram.entries) ** 2
        residuals = np.sqrt(np.clip(squared, 0.0, None))
        # exactly zero on the span, whatever the rounding
        residuals[trace.selected_indices + [k]] = 0.0

        trace.selected_indices.append(k)
        trace.errors.append(float(residuals.max()))
        logger.log_greedy_step(step + 1, k, trace.errors[-1])
    else:
        trace.converged = N_max == S or trace.errors[-1] < stop_tol

    return trace


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    ss_res = float(np.sum((y - fitted) ** 2))
    return min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)


def fit_decay(errors: Sequence[float], skip_first: int = 1,
              n_values: Optional[Sequence[int]] = None) -> DecayFit:
    """Fit err ~ C N^p on log-log axes and err ~ C e^{r N} on semilog axes.

    By default ``errors[n]`` belongs to N = n and the N = 0 entry (a norm,
    not an approximation error) is skipped.
    """
    if skip_first < 0:
        raise InvalidParameterError(f"skip_first={skip_first} must be nonnegative")
    values = np.asarray(errors, dtype=float)
    n = np.arange(values.size, dtype=float) if n_values is None else np.asarray(n_values, dtype=float)
    if n.shape != values.shape:
        raise DecayFitError(f"{n.size} N values for {values.size} errors")
    values, n = values[skip_first:], n[skip_first:]

    if values.size < MIN_FIT_POINTS:
        raise DecayFitError(f"need at least {MIN_FIT_POINTS} errors to fit, got {values.size}")
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise DecayFitError("errors in the fit window must be positive")
    if np.any(n <= 0.0):
        raise DecayFitError("N values in the fit window must be positive")

    log_err = np.log(values)
    log_n = np.log(n)
    exponent, log_c_alg = np.polyfit(log_n, log_err, 1)
    rate, log_c_exp = np.polyfit(n, log_err, 1)
    algebraic_r2 = _r_squared(log_err, exponent * log_n + log_c_alg)
    exponential_r2 = _r_squared(log_err, rate * n + log_c_exp)

    return DecayFit(
        algebraic_exponent=float(exponent),
        algebraic_constant=math.exp(log_c_alg),
        algebraic_r2=algebraic_r2,
        exponential_rate=float(rate),
        exponential_constant=math.exp(log_c_exp),
        exponential_r2=exponential_r2,
        better_model=DecayModel.ALGEBRAIC if algebraic_r2 >= exponential_r2 else DecayModel.EXPONENTIAL,
        n_values=[int(v) for v in n],
    )


def positive_prefix(values: Sequence[Optional[float]], floor: float) -> List[float]:
    """Leading entries above ``floor``; the fit stops where values hit the rounding floor."""
    prefix: List[float] = []
    for value in values:
        if value is None or value <= floor:
            break
        prefix.append(float(value))
    return prefix
