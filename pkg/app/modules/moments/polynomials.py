# app/modules/moments/polynomials.py
"""
(x, w, lambda) 다항식 집합.

변수 순서: x_1..x_n, w_1..w_m, lambda.  z = C x + D w.
  E: (A x + B w - lambda x)_i,  w_i z_i - w_i^2,  ||x||^2 + ||w||^2 - 1
  G: w_i w_j,  w_j w_i - w_j z_i,  (w_i - z_i)(w_j - z_j)     (모든 i, j)
"""
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, List, Sequence, Tuple

import numpy as np
import sympy as sp
from pydantic import Field

from app.core.types import NumericModel
from app.modules.system.schemas import ReluSystem

Exponent = Tuple[int, ...]
Terms = Dict[Exponent, float]


def variable_symbols(n: int, m: int) -> Tuple[sp.Symbol, ...]:
    xs = sp.symbols(f"x1:{n + 1}")
    ws = sp.symbols(f"w1:{m + 1}")
    return (*xs, *ws, sp.Symbol("lam"))


@lru_cache(maxsize=None)
def _basis(n_vars: int, degree: int) -> Tuple[Exponent, ...]:
    basis: List[Exponent] = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(n_vars), d):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            basis.append(tuple(e))
    return tuple(basis)


def monomial_basis(n_vars: int, degree: int) -> List[Exponent]:
    """차수 <= degree 인 지수 벡터들 (graded lex, 마지막 변수가 가장 낮은 순위)"""
    return list(_basis(n_vars, degree))


def exponent_codes(exponents, base: int) -> np.ndarray:
    """지수 벡터를 base 진법 정수로. 합의 차수가 base 미만이면 code(a + b) = code(a) + code(b)"""
    arr = np.asarray(exponents, dtype=np.int64).reshape(-1, len(exponents[0]))
    return arr @ (base ** np.arange(arr.shape[1], dtype=np.int64))


def poly_terms(p: sp.Poly) -> Terms:
    return {tuple(int(k) for k in mon): float(c) for mon, c in p.terms() if float(c) != 0.0}


def evaluate_terms(terms: Terms, point: Sequence[float]) -> float:
    v = np.asarray(point, dtype=float)
    total = 0.0
    for exp, c in terms.items():
        total += c * float(np.prod(v ** np.asarray(exp)))
    return total


class PolynomialSet(NumericModel):
    n: int
    m: int
    gens: Tuple[sp.Symbol, ...]
    E: List[sp.Poly] = Field(default_factory=list)
    G: List[sp.Poly] = Field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.n + self.m + 1

    def equality_terms(self) -> List[Terms]:
        return [poly_terms(p) for p in self.E]

    def inequality_terms(self) -> List[Terms]:
        return [poly_terms(p) for p in self.G]

    def evaluate(self, point: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """(E 값, G 값)"""
        e = np.array([evaluate_terms(t, point) for t in self.equality_terms()])
        g = np.array([evaluate_terms(t, point) for t in self.inequality_terms()])
        return e, g


def _poly(expr, gens) -> sp.Poly:
    return sp.Poly(sp.expand(expr), *gens)


def build_polynomial_sets(sys: ReluSystem) -> PolynomialSet:
    n, m = sys.n, sys.m
    gens = variable_symbols(n, m)
    x = sp.Matrix(gens[:n])
    w = sp.Matrix(gens[n:n + m])
    lam = gens[-1]

    A, B, C, D = (sp.Matrix(M.tolist()) for M in (sys.A, sys.B, sys.C, sys.D))
    z = C * x + D * w
    flow = A * x + B * w - lam * x

    E = [_poly(flow[i], gens) for i in range(n)]
    E += [_poly(w[i] * z[i] - w[i] ** 2, gens) for i in range(m)]
    E.append(_poly((x.T * x)[0] + (w.T * w)[0] - 1, gens))

    raw = []
    for i in range(m):
        for j in range(m):
            raw.append(w[i] * w[j])
            raw.append(w[j] * w[i] - w[j] * z[i])
            raw.append((w[i] - z[i]) * (w[j] - z[j]))

    G: List[sp.Poly] = []
    seen = []
    for expr in raw:
        p = _poly(expr, gens)
        terms = poly_terms(p)
        # 0 다항식과 (i, j) 대칭으로 겹치는 것은 뺀다
        if not terms or terms in seen:
            continue
        seen.append(terms)
        G.append(p)
    return PolynomialSet(n=n, m=m, gens=gens, E=E, G=G)


def lambda_objective(n: int, m: int) -> sp.Poly:
    gens = variable_symbols(n, m)
    return sp.Poly(gens[-1], *gens)
