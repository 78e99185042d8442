"""
Expression Graph - Scalar expression DAG with exact derivatives

Expressions are immutable nodes built through operator overloading:
- leaves: constants, variables (by index) and per-instance parameters
- n-ary sums, binary products, constant powers, negation
- sin, cos, tan, exp, sqrt
- squared and plain euclidean norms of expression lists

Derivatives come from a batched forward second-order sweep: one graph is
evaluated for many instances at once (e.g. all shooting intervals), each node
carrying its value, gradient and Hessian with respect to the local variables.
The elementary functions are polymorphic: called on plain numbers or arrays
they evaluate numerically, so model code works for both symbolic and numeric
inputs.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from trigopt.errors import DomainError

NORM_GUARD = 1e-9
TAN_POLE_GUARD = 1e-12

Number = Union[int, float, np.floating, np.integer]
Jet = Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]


class Expr:
    """A node of a scalar expression graph."""

    __slots__ = ("kind", "children", "value", "index", "guard")

    def __init__(
        self,
        kind: str,
        children: Tuple["Expr", ...] = (),
        value: float = 0.0,
        index: int = -1,
        guard: bool = False,
    ) -> None:
        self.kind = kind
        self.children = children
        self.value = value
        self.index = index
        self.guard = guard

    def __repr__(self) -> str:
        if self.kind == "const":
            return f"Expr(const={self.value!r})"
        if self.kind in ("var", "param"):
            return f"Expr({self.kind}={self.index})"
        if self.kind == "pow":
            return f"Expr(pow^{self.value!r}, {self.children[0]!r})"
        return f"Expr({self.kind}, {len(self.children)} children)"

    # Arithmetic -----------------------------------------------------------

    def __add__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return add(self, other_expr)

    def __radd__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return add(other_expr, self)

    def __sub__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return add(self, negate(other_expr))

    def __rsub__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return add(other_expr, negate(self))

    def __mul__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return multiply(self, other_expr)

    def __rmul__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return multiply(other_expr, self)

    def __truediv__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        if other_expr.kind == "const":
            if other_expr.value == 0.0:
                raise DomainError("Division by the constant zero")
            return multiply(self, const(1.0 / other_expr.value))
        return multiply(self, power(other_expr, -1.0))

    def __rtruediv__(self, other: object) -> "Expr":
        other_expr = _coerce(other)
        if other_expr is None:
            return NotImplemented
        return multiply(other_expr, power(self, -1.0))

    def __neg__(self) -> "Expr":
        return negate(self)

    def __pos__(self) -> "Expr":
        return self

    def __pow__(self, exponent: object) -> "Expr":
        if isinstance(exponent, Expr):
            if exponent.kind != "const":
                return NotImplemented
            exponent = exponent.value
        if not isinstance(exponent, (int, float, np.integer, np.floating)):
            return NotImplemented
        return power(self, float(exponent))

    # numpy defers binary operators to the reflected Expr methods.
    __array_ufunc__ = None


def _coerce(other: object) -> Optional[Expr]:
    if isinstance(other, Expr):
        return other
    if isinstance(other, (int, float, np.integer, np.floating)):
        return const(float(other))
    if isinstance(other, np.ndarray) and other.ndim == 0:
        return const(float(other))
    return None


def is_expr(value: object) -> bool:
    """Return True when value is an expression node."""
    return isinstance(value, Expr)


# Leaves ---------------------------------------------------------------------


def const(value: Number) -> Expr:
    """Constant leaf."""
    return Expr("const", value=float(value))


def var(index: int) -> Expr:
    """Variable leaf referring to position ``index`` of the point vector."""
    if index < 0:
        raise ValueError(f"Variable index must be non-negative, got {index}")
    return Expr("var", index=int(index))


def param(index: int) -> Expr:
    """Per-instance parameter leaf (column ``index`` of the parameter table)."""
    if index < 0:
        raise ValueError(f"Parameter index must be non-negative, got {index}")
    return Expr("param", index=int(index))


def variables(count: int, offset: int = 0) -> List[Expr]:
    """Return ``count`` consecutive variable leaves starting at ``offset``."""
    return [var(offset + i) for i in range(count)]


# Constructors with light constant folding -----------------------------------


def add(*terms: Expr) -> Expr:
    """N-ary sum; constant terms are folded into a single constant."""
    children: List[Expr] = []
    constant = 0.0
    for term in terms:
        if term.kind == "const":
            constant += term.value
        elif term.kind == "add":
            for child in term.children:
                if child.kind == "const":
                    constant += child.value
                else:
                    children.append(child)
        else:
            children.append(term)
    if not children:
        return const(constant)
    if constant != 0.0:
        children.append(const(constant))
    if len(children) == 1:
        return children[0]
    return Expr("add", tuple(children))


def sum_exprs(terms: Sequence[Union[Expr, Number]]) -> Union[Expr, float]:
    """Sum a sequence of expressions (or numbers) into one node."""
    exprs = [t for t in terms if isinstance(t, Expr)]
    numbers = [float(t) for t in terms if not isinstance(t, Expr)]
    if not exprs:
        return float(sum(numbers))
    if numbers:
        exprs.append(const(sum(numbers)))
    return add(*exprs)


def negate(term: Expr) -> Expr:
    if term.kind == "const":
        return const(-term.value)
    if term.kind == "neg":
        return term.children[0]
    return Expr("neg", (term,))


def multiply(left: Expr, right: Expr) -> Expr:
    if left.kind == "const" and right.kind == "const":
        return const(left.value * right.value)
    if left.kind == "const":
        left, right = right, left
    if right.kind == "const":
        if right.value == 0.0:
            return const(0.0)
        if right.value == 1.0:
            return left
        if right.value == -1.0:
            return negate(left)
    return Expr("mul", (left, right))


def power(base: Expr, exponent: float) -> Expr:
    if exponent == 0.0:
        return const(1.0)
    if exponent == 1.0:
        return base
    if base.kind == "const":
        return const(_numeric_power(np.asarray(base.value), exponent).item())
    return Expr("pow", (base,), value=float(exponent))


# Polymorphic elementary functions -------------------------------------------


def _unary(kind: str, arg: Union[Expr, Number, np.ndarray], numeric) -> Union[Expr, np.ndarray, float]:
    if isinstance(arg, Expr):
        if arg.kind == "const":
            return const(float(numeric(np.asarray(arg.value))))
        return Expr(kind, (arg,))
    return numeric(arg)


def _numeric_tan(arg):
    cosine = np.cos(arg)
    if np.any(np.abs(cosine) < TAN_POLE_GUARD):
        raise DomainError("tan evaluated at a pole")
    return np.tan(arg)


def _numeric_sqrt(arg):
    if np.any(np.asarray(arg) < 0.0):
        raise DomainError("sqrt of a negative value")
    return np.sqrt(arg)


def _numeric_power(base, exponent: float):
    base = np.asarray(base, dtype=float)
    if float(exponent).is_integer():
        if exponent < 0 and np.any(base == 0.0):
            raise DomainError(f"Zero raised to negative power {exponent}")
        return np.power(base, exponent)
    if np.any(base < 0.0):
        raise DomainError(f"Negative base raised to fractional power {exponent}")
    if exponent < 0 and np.any(base == 0.0):
        raise DomainError(f"Zero raised to negative power {exponent}")
    return np.power(base, exponent)


def sin(arg):
    """Sine of an expression or number."""
    return _unary("sin", arg, np.sin)


def cos(arg):
    """Cosine of an expression or number."""
    return _unary("cos", arg, np.cos)


def tan(arg):
    """Tangent; raises DomainError at a pole."""
    return _unary("tan", arg, _numeric_tan)


def exp(arg):
    """Exponential of an expression or number."""
    return _unary("exp", arg, np.exp)


def sqrt(arg):
    """Square root; raises DomainError for negative arguments."""
    return _unary("sqrt", arg, _numeric_sqrt)


def sumsq(items: Sequence) -> Union[Expr, float]:
    """Squared euclidean norm of a list of expressions or numbers."""
    items = list(items)
    if not any(isinstance(item, Expr) for item in items):
        return float(np.sum(np.square(np.asarray(items, dtype=float))))
    return Expr("sumsq", tuple(_coerce(item) for item in items))


def norm2(items: Sequence, guard: bool = True) -> Union[Expr, float]:
    """
    Euclidean norm of a list of expressions or numbers.

    Args:
        items: Vector components
        guard: When set, any evaluation with norm below NORM_GUARD raises
            DomainError instead of returning a subgradient

    Returns:
        Norm expression, or a float for purely numeric input
    """
    items = list(items)
    if not any(isinstance(item, Expr) for item in items):
        value = float(np.sqrt(np.sum(np.square(np.asarray(items, dtype=float)))))
        if guard and value < NORM_GUARD:
            raise DomainError(f"Euclidean norm {value:.3e} inside guard radius {NORM_GUARD}")
        return value
    return Expr("norm2", tuple(_coerce(item) for item in items), guard=guard)


def dot(left: Sequence, right: Sequence):
    """Inner product of two equally long sequences."""
    if len(left) != len(right):
        raise ValueError(f"dot of sequences with lengths {len(left)} and {len(right)}")
    return sum_exprs([a * b for a, b in zip(left, right)])


# Graph utilities ------------------------------------------------------------


def topological_order(outputs: Sequence[Expr]) -> List[Expr]:
    """Return all nodes reachable from ``outputs``, children before parents."""
    order: List[Expr] = []
    seen = set()
    for root in outputs:
        if id(root) in seen:
            continue
        stack: List[Tuple[Expr, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in reversed(node.children):
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def referenced_variables(outputs: Union[Expr, Sequence[Expr]]) -> List[int]:
    """Sorted list of variable indices referenced by the expressions."""
    roots = [outputs] if isinstance(outputs, Expr) else list(outputs)
    return sorted({node.index for node in topological_order(roots) if node.kind == "var"})


def referenced_parameters(outputs: Union[Expr, Sequence[Expr]]) -> List[int]:
    """Sorted list of parameter columns referenced by the expressions."""
    roots = [outputs] if isinstance(outputs, Expr) else list(outputs)
    return sorted({node.index for node in topological_order(roots) if node.kind == "param"})


def substitute(
    outputs: Sequence[Expr], mapping: Dict[int, Union[Expr, Number]]
) -> List[Expr]:
    """
    Replace variable leaves by other expressions.

    Args:
        outputs: Expressions to rewrite
        mapping: Variable index -> replacement (expression or number);
            variables absent from the mapping are kept

    Returns:
        Rewritten expressions (shared subgraphs stay shared)
    """
    replaced: Dict[int, Expr] = {}
    for node in topological_order(outputs):
        if node.kind == "var":
            target = mapping.get(node.index)
            if target is None:
                new = node
            else:
                coerced = _coerce(target)
                if coerced is None:
                    raise TypeError(f"Cannot substitute variable {node.index} by {target!r}")
                new = coerced
        elif not node.children:
            new = node
        else:
            children = tuple(replaced[id(child)] for child in node.children)
            if all(a is b for a, b in zip(children, node.children)):
                new = node
            else:
                new = _rebuild(node, children)
        replaced[id(node)] = new
    return [replaced[id(root)] for root in outputs]


def _rebuild(node: Expr, children: Tuple[Expr, ...]) -> Expr:
    if node.kind == "add":
        return add(*children)
    if node.kind == "mul":
        return multiply(children[0], children[1])
    if node.kind == "neg":
        return negate(children[0])
    if node.kind == "pow":
        return power(children[0], node.value)
    if node.kind in ("sin", "cos", "tan", "exp", "sqrt"):
        return Expr(node.kind, children)
    if node.kind in ("sumsq", "norm2"):
        return Expr(node.kind, children, guard=node.guard)
    raise ValueError(f"Unknown expression kind {node.kind!r}")


# Forward second-order evaluation -------------------------------------------


def _scale_grad(coef: np.ndarray, grad: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if grad is None:
        return None
    return coef[:, None] * grad


def _scale_hess(coef: np.ndarray, hess: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if hess is None:
        return None
    return coef[:, None, None] * hess


def _outer(left: Optional[np.ndarray], right: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if left is None or right is None:
        return None
    return left[:, :, None] * right[:, None, :]


def _accumulate(total: Optional[np.ndarray], term: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if term is None:
        return total
    if total is None:
        return term
    return total + term


def _elementary(kind: str, arg: np.ndarray, node: Expr, degree: int):
    """Return (f, f', f'') of a unary node at ``arg``."""
    if kind == "sin":
        s = np.sin(arg)
        return s, np.cos(arg), -s
    if kind == "cos":
        c = np.cos(arg)
        return c, -np.sin(arg), -c
    if kind == "tan":
        t = _numeric_tan(arg)
        d1 = 1.0 + t * t
        return t, d1, 2.0 * t * d1
    if kind == "exp":
        e = np.exp(arg)
        return e, e, e
    if kind == "sqrt":
        s = _numeric_sqrt(arg)
        if degree > 0 and np.any(s < NORM_GUARD):
            raise DomainError("sqrt derivative requested at zero")
        with np.errstate(divide="ignore"):
            return s, 0.5 / s, -0.25 / (s * s * s)
    if kind == "pow":
        p = node.value
        base = np.asarray(arg, dtype=float)
        if not p.is_integer():
            if np.any(base < 0.0):
                raise DomainError(f"Negative base raised to fractional power {p}")
            if np.any(base == 0.0) and (p < 0 or (degree > 0 and p < 1) or (degree > 1 and p < 2)):
                raise DomainError(f"Derivative of x^{p} requested at zero")
        elif p < 0 and np.any(base == 0.0):
            raise DomainError(f"Zero raised to negative power {p}")
        value = np.power(base, p)
        if degree == 0:
            return value, None, None
        first = p * np.power(base, p - 1.0) if p != 1.0 else np.ones_like(base)
        if p == 2.0:
            second = np.full_like(base, 2.0)
        elif p == 1.0:
            second = np.zeros_like(base)
        else:
            second = p * (p - 1.0) * np.power(base, p - 2.0)
        return value, first, second
    raise ValueError(f"Unknown unary kind {kind!r}")


def forward(
    nodes: Sequence[Expr],
    outputs: Sequence[Expr],
    x: np.ndarray,
    params: Optional[np.ndarray] = None,
    degree: int = 2,
) -> List[Jet]:
    """
    Batched forward sweep over a topologically ordered graph.

    Args:
        nodes: Result of topological_order(outputs)
        outputs: Expressions whose jets are returned
        x: Local variable values, shape (B, k)
        params: Per-instance parameters, shape (B, p)
        degree: 0 for values, 1 adds gradients, 2 adds Hessians

    Returns:
        One (value (B,), gradient (B, k) or None, Hessian (B, k, k) or None)
        per output; None stands for an identically zero derivative

    Raises:
        DomainError: If a node is evaluated outside its domain
    """
    x = np.asarray(x, dtype=float)
    batch, width = x.shape
    jets: Dict[int, Jet] = {}
    units: Dict[int, np.ndarray] = {}

    for node in nodes:
        kind = node.kind
        grad: Optional[np.ndarray] = None
        hess: Optional[np.ndarray] = None

        if kind == "const":
            value = np.full(batch, node.value)
        elif kind == "var":
            value = x[:, node.index]
            if degree > 0:
                unit = units.get(node.index)
                if unit is None:
                    unit = np.zeros((batch, width))
                    unit[:, node.index] = 1.0
                    units[node.index] = unit
                grad = unit
        elif kind == "param":
            if params is None:
                raise ValueError(f"Expression references parameter {node.index} but none given")
            value = np.asarray(params[:, node.index], dtype=float)
        elif kind == "add":
            child_jets = [jets[id(c)] for c in node.children]
            value = child_jets[0][0]
            for jet in child_jets[1:]:
                value = value + jet[0]
            if degree > 0:
                for jet in child_jets:
                    grad = _accumulate(grad, jet[1])
                    if degree > 1:
                        hess = _accumulate(hess, jet[2])
        elif kind == "mul":
            va, ga, ha = jets[id(node.children[0])]
            vb, gb, hb = jets[id(node.children[1])]
            value = va * vb
            if degree > 0:
                grad = _accumulate(_scale_grad(vb, ga), _scale_grad(va, gb))
                if degree > 1:
                    hess = _accumulate(_scale_hess(vb, ha), _scale_hess(va, hb))
                    cross = _outer(ga, gb)
                    if cross is not None:
                        hess = _accumulate(hess, cross + np.swapaxes(cross, 1, 2))
        elif kind == "neg":
            va, ga, ha = jets[id(node.children[0])]
            value = -va
            grad = None if ga is None else -ga
            hess = None if ha is None else -ha
        elif kind in ("sin", "cos", "tan", "exp", "sqrt", "pow"):
            va, ga, ha = jets[id(node.children[0])]
            value, first, second = _elementary(kind, va, node, degree)
            if degree > 0 and ga is not None:
                grad = _scale_grad(first, ga)
                if degree > 1:
                    hess = _accumulate(_scale_hess(first, ha), _scale_hess(second, _outer(ga, ga)))
        elif kind in ("sumsq", "norm2"):
            child_jets = [jets[id(c)] for c in node.children]
            total = np.zeros(batch)
            for jet in child_jets:
                total = total + jet[0] * jet[0]
            weighted: Optional[np.ndarray] = None
            curvature: Optional[np.ndarray] = None
            if degree > 0:
                for vc, gc, hc in child_jets:
                    weighted = _accumulate(weighted, _scale_grad(vc, gc))
                    if degree > 1:
                        curvature = _accumulate(curvature, _outer(gc, gc))
                        curvature = _accumulate(curvature, _scale_hess(vc, hc))
            if kind == "sumsq":
                value = total
                grad = None if weighted is None else 2.0 * weighted
                hess = None if curvature is None else 2.0 * curvature
            else:
                norm = np.sqrt(total)
                small = norm < NORM_GUARD
                if np.any(small) and (node.guard or (degree > 0 and weighted is not None)):
                    raise DomainError(
                        f"Euclidean norm {float(norm.min()):.3e} inside guard radius {NORM_GUARD}"
                    )
                value = norm
                if weighted is not None:
                    grad = weighted / norm[:, None]
                    if degree > 1:
                        hess = -_outer(weighted, weighted) / (norm**3)[:, None, None]
                        if curvature is not None:
                            hess = hess + curvature / norm[:, None, None]
        else:
            raise ValueError(f"Unknown expression kind {kind!r}")

        if degree < 2:
            hess = None
        if degree < 1:
            grad = None
        jets[id(node)] = (value, grad, hess)

    return [jets[id(out)] for out in outputs]


def evaluate_expr(
    expr: Expr, point: Sequence[float], params: Optional[Sequence[float]] = None
) -> float:
    """Evaluate one expression at a single point."""
    value, _, _ = value_and_derivatives(expr, point, params, degree=0)
    return value


def value_and_derivatives(
    expr: Expr,
    point: Sequence[float],
    params: Optional[Sequence[float]] = None,
    degree: int = 2,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Value, dense gradient and dense Hessian of one expression at one point.

    Args:
        expr: Expression over variables 0..len(point)-1
        point: Variable values
        params: Parameter values for ``param`` leaves
        degree: Highest derivative order to compute

    Returns:
        (value, gradient (n,), Hessian (n, n)); zeros where not computed
    """
    x = np.asarray(point, dtype=float).reshape(1, -1)
    p = None if params is None else np.asarray(params, dtype=float).reshape(1, -1)
    used = referenced_variables(expr)
    if used and used[-1] >= x.shape[1]:
        raise ValueError(f"Expression references variable {used[-1]} beyond point of size {x.shape[1]}")
    (value, grad, hess), = forward(topological_order([expr]), [expr], x, p, degree)
    n = x.shape[1]
    g = np.zeros(n) if grad is None else grad[0]
    h = np.zeros((n, n)) if hess is None else hess[0]
    return float(value[0]), g, h


# Interval arithmetic --------------------------------------------------------

Interval = Tuple[float, float]


def _interval_mul(a: Interval, b: Interval) -> Interval:
    products = []
    for x in a:
        for y in b:
            if (x == 0.0 and math.isinf(y)) or (y == 0.0 and math.isinf(x)):
                products.append(0.0)
            else:
                products.append(x * y)
    return min(products), max(products)


def _sine_interval(lo: float, hi: float) -> Interval:
    if math.isinf(lo) or math.isinf(hi) or hi - lo >= 2.0 * math.pi:
        return -1.0, 1.0
    values = [math.sin(lo), math.sin(hi)]
    upper = max(values)
    lower = min(values)
    # maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
    if math.ceil((lo - math.pi / 2) / (2 * math.pi)) <= math.floor((hi - math.pi / 2) / (2 * math.pi)):
        upper = 1.0
    if math.ceil((lo + math.pi / 2) / (2 * math.pi)) <= math.floor((hi + math.pi / 2) / (2 * math.pi)):
        lower = -1.0
    return lower, upper


def _power_interval(lo: float, hi: float, p: float) -> Interval:
    if p.is_integer():
        k = int(p)
        if k > 0 and k % 2 == 0:
            if lo >= 0.0:
                return lo**k, hi**k
            if hi <= 0.0:
                return hi**k, lo**k
            return 0.0, max(lo**k, hi**k)
        if k > 0:
            return lo**k, hi**k
        if lo <= 0.0 <= hi:
            return -math.inf, math.inf
        ends = [lo**k if not math.isinf(lo) else 0.0, hi**k if not math.isinf(hi) else 0.0]
        return min(ends), max(ends)
    lo = max(lo, 0.0)
    if hi < 0.0:
        return math.nan, math.nan
    if p > 0:
        return lo**p, hi**p
    if lo == 0.0:
        return (hi**p if not math.isinf(hi) else 0.0), math.inf
    return (hi**p if not math.isinf(hi) else 0.0), lo**p


def interval_bounds(
    expr: Expr,
    lower: Sequence[float],
    upper: Sequence[float],
    params: Optional[Sequence[float]] = None,
) -> Interval:
    """
    Natural interval extension of an expression over a variable box.

    Args:
        expr: Expression to bound
        lower: Lower bounds indexed by variable
        upper: Upper bounds indexed by variable
        params: Parameter values (one instance) for ``param`` leaves

    Returns:
        (lo, hi) with lo <= expr(x) <= hi for every x in the box
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    bounds: Dict[int, Interval] = {}
    for node in topological_order([expr]):
        kind = node.kind
        if kind == "const":
            result = (node.value, node.value)
        elif kind == "var":
            if node.index >= lower.size:
                result = (-math.inf, math.inf)
            else:
                result = (float(lower[node.index]), float(upper[node.index]))
        elif kind == "param":
            if params is None:
                result = (-math.inf, math.inf)
            else:
                result = (float(params[node.index]), float(params[node.index]))
        elif kind == "add":
            parts = [bounds[id(c)] for c in node.children]
            result = (sum(p[0] for p in parts), sum(p[1] for p in parts))
        elif kind == "mul":
            result = _interval_mul(bounds[id(node.children[0])], bounds[id(node.children[1])])
        elif kind == "neg":
            lo, hi = bounds[id(node.children[0])]
            result = (-hi, -lo)
        elif kind == "exp":
            lo, hi = bounds[id(node.children[0])]
            result = (math.exp(lo) if lo < 700 else math.inf, math.exp(hi) if hi < 700 else math.inf)
        elif kind == "sqrt":
            lo, hi = bounds[id(node.children[0])]
            result = (math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0)))
        elif kind == "sin":
            result = _sine_interval(*bounds[id(node.children[0])])
        elif kind == "cos":
            lo, hi = bounds[id(node.children[0])]
            result = _sine_interval(lo + math.pi / 2, hi + math.pi / 2)
        elif kind == "tan":
            lo, hi = bounds[id(node.children[0])]
            if math.isinf(lo) or math.isinf(hi) or math.floor((lo - math.pi / 2) / math.pi) != math.floor(
                (hi - math.pi / 2) / math.pi
            ):
                result = (-math.inf, math.inf)
            else:
                result = (math.tan(lo), math.tan(hi))
        elif kind == "pow":
            result = _power_interval(*bounds[id(node.children[0])], node.value)
        elif kind in ("sumsq", "norm2"):
            total_lo = 0.0
            total_hi = 0.0
            for child in node.children:
                lo, hi = _power_interval(*bounds[id(child)], 2.0)
                total_lo += lo
                total_hi += hi
            if kind == "sumsq":
                result = (total_lo, total_hi)
            else:
                result = (math.sqrt(total_lo), math.sqrt(total_hi))
        else:
            raise ValueError(f"Unknown expression kind {kind!r}")
        bounds[id(node)] = result
    return bounds[id(expr)]
