"""
Two cells and one membrane
==========================

The smallest network: a source cell feeding a sink cell.  The steady state
is known in closed form (a = (2, 1), X = 1), so this is a good first look at
the integrator and at the Murray check.
"""
import numpy as np

from venation import Graph
from venation.analysis import murray_residual
from venation.dynamics import ModelParams, PrimaryModel
from venation.solver import IntegratorConfig, integrate

g = Graph(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0, 1]]))
p = ModelParams(S=np.array([1.0, 0.0]), I=np.array([0.0, 1.0]))
model = PrimaryModel(g, p)

res = integrate(model.rhs, [1.0, 1.0, 1.0], IntegratorConfig(), jac=model.jac,
                nonneg=model.nonneg, freeze=model.freeze, positive=model.positive)
st = model.unpack(res.y_final, res.t_final)
print(f"steady after t = {res.steady_time:.2f} in {res.stats['n_steps']} steps")
print("a =", st.a, " X =", st.X)

rep = murray_residual(g, p, st)
print("Murray relative residual:", rep.max_relative_residual)
