"""scikit-learn style wrappers around the transformer engines.

``fit`` solves the procedure environment of a program once; ``transform``
then maps any number of post-expectations (or runtimes) to their
pre-expectations without iterating again.
"""
from __future__ import annotations

from typing import Mapping, Optional, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .parser import parse_expectation, parse_program
from .semantics import ONE_BOUNDED, RUNTIME, UNBOUNDED, Expectation, StateSpace, eval_expectation
from .syntax import Program
from .transformers import (CostModel, FixpointReport, _handler, build_kernel, iterate_environments,
                           transform_vec, _raise_on_fault, MONOTONE_SLACK)

Post = Union[Expectation, np.ndarray, list, str, float, int]


def _inf_norm(D) -> float:
    if D.nnz == 0:
        return 0.0
    return float(np.abs(D).sum(axis=1).max())


class _EnvEstimator(BaseEstimator):
    _mode = "wp"

    def __init__(self, max_iters: int = 100000, tol: float = 1e-9, cost_model: str = "default"):
        self.max_iters = max_iters
        self.tol = tol
        self.cost_model = cost_model

    def fit(self, program, y=None, bindings: Optional[Mapping] = None):
        """Solve the environment of ``program`` (a Program or source text).

        Convergence is measured on the kernels themselves (row-sum norm of
        successive differences), so later ``transform`` calls are accurate
        for any bounded post-expectation, not just a probe.
        """
        prog = parse_program(program) if isinstance(program, str) else program
        if not isinstance(prog, Program):
            raise TypeError("fit expects a Program or program source text")
        sp = StateSpace.of(prog, bindings)
        runtime = self._mode == "ert"
        cost = CostModel.parse(self.cost_model)
        prev = None
        delta = np.inf
        converged = False
        for lv in iterate_environments(prog, sp, runtime=runtime, cost=cost):
            if prev is not None:
                delta = 0.0
                for p, k in lv.kernels.items():
                    delta = max(delta, _inf_norm(k.A - prev.kernels[p].A),
                                float(np.abs(k.e - prev.kernels[p].e).max(initial=0.0)))
                    if runtime:
                        a, b = lv.offsets[p], prev.offsets[p]
                        if np.any(a < b - MONOTONE_SLACK):
                            raise RuntimeError("runtime iterates are not monotone")
                        with np.errstate(invalid="ignore"):
                            d = np.where(np.isinf(a) & np.isinf(b), 0.0, np.abs(a - b))
                        delta = max(delta, float(d.max(initial=0.0)))
                if delta < self.tol:
                    converged = True
                    break
            prev = lv
            if lv.n >= self.max_iters:
                break
        self.program_ = prog
        self.space_ = sp
        self.env_ = lv
        self.n_iter_ = lv.n
        direction = "upper" if self._mode == "wlp" else "lower"
        self.report_ = FixpointReport(lv.n, delta, converged, direction)
        self.main_kernel_ = build_kernel(prog.main, sp, lv.kernels)
        _raise_on_fault(sp, self.main_kernel_.e)
        return self

    def _post_vector(self, post: Post) -> np.ndarray:
        if isinstance(post, Expectation):
            if post.space != self.space_:
                raise ValueError("post-expectation lives on a different state space")
            return post.values
        if isinstance(post, str):
            tree = parse_expectation(post, self.program_)
            return eval_expectation(tree, self.space_).values
        v = np.asarray(post, dtype=float)
        if v.ndim == 0:
            return np.full(self.space_.size, float(v))
        if v.shape != (self.space_.size,):
            raise ValueError(f"expected a vector of length {self.space_.size}, got shape {v.shape}")
        if np.isnan(v).any() or (v < 0).any():
            raise ValueError("expectations are non-negative")
        return v

    def _apply(self, f: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transform(self, post: Post) -> Expectation:
        check_is_fitted(self, "env_")
        return self._apply(self._post_vector(post))

    def fit_transform(self, program, post: Post = "1", bindings=None):
        return self.fit(program, bindings=bindings).transform(post)


class WpEstimator(_EnvEstimator):
    """Weakest pre-expectations of ``main`` (least fixpoint, approached from below)."""
    _mode = "wp"

    def _apply(self, f):
        return Expectation(self.space_, self.main_kernel_.wp(f), UNBOUNDED)


class WlpEstimator(_EnvEstimator):
    """Weakest liberal pre-expectations (greatest fixpoint, approached from above)."""
    _mode = "wlp"

    def _apply(self, f):
        if (f > 1 + 1e-12).any():
            raise ValueError("wlp needs a one-bounded post-expectation")
        return Expectation(self.space_, np.minimum(self.main_kernel_.wlp(f), 1.0), ONE_BOUNDED)


class ErtEstimator(_EnvEstimator):
    """Expected runtimes of ``main`` under the configured cost model."""
    _mode = "ert"

    def _apply(self, t):
        cost = CostModel.parse(self.cost_model)
        vals = transform_vec(self.program_.main, self.space_, "ert", t,
                             _handler(self.env_.runtime_env(), "ert"), cost)
        return Expectation(self.space_, vals, RUNTIME)
