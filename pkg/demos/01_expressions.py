"""Expression trees: parse once, then evaluate, differentiate, and print.

The DSL knows +, -, *, /, ^ with the usual precedence, and the functions
sin, cos, exp, log, sqrt, tanh, bump.
"""

import numpy as np

from divkit import parse_expr

f = parse_expr("exp(x^2 - y) * sin(x*y)", ("x", "y"))
print("f      =", f)
print("df/dx  =", f.diff("x").simplify())
print("df/dy  =", f.diff("y").simplify())

env = {"x": 0.5, "y": -0.25}
print("f(0.5, -0.25) =", f.eval(env))

xs = np.linspace(-1.0, 1.0, 5)
ys = np.full_like(xs, 0.25)
print("vectorized row:", f.eval_many({"x": xs, "y": ys}))

# the bump mollifier is compactly supported: nonzero only on |t| < 1
g = parse_expr("bump(x)", ("x",))
for t in (0.0, 0.5, 0.999, 1.0, 2.0):
    print(f"bump({t}) = {g.eval({'x': t}):.6g}")
