"""
Interval reachability for the unicycle
======================================

One sampling period of the unicycle from a box of initial states. The
over-approximation is compared with a cloud of simulated trajectories.
"""

import numpy as np

from hierltl.intervals import Box
from hierltl.models import polynomial_model, unicycle_model
from hierltl.reach import over_approximate, simulate_flow

# A small wind disturbance on position and heading.
robot = unicycle_model(Box([-0.05, -0.05, -0.02], [0.05, 0.05, 0.02]))
start = Box([3.3, 8.3, -0.3], [4.95, 9.97, 0.3])
u = np.array([0.5, 0.15])
tau = 4.0

reach = over_approximate(robot, start, u, robot.disturbance_space, tau).over_box
print("over-approximation lo:", np.round(reach.lo, 3))
print("over-approximation hi:", np.round(reach.hi, 3))

###############################################################################
# Simulated trajectories with piecewise-constant disturbances.

rng = np.random.default_rng(0)
z0 = rng.uniform(start.lo, start.hi, size=(2000, 3))
d = rng.uniform(robot.disturbance_space.lo, robot.disturbance_space.hi, size=(2000, 4, 3))
z = simulate_flow(robot, z0, np.broadcast_to(u, (2000, 2)), d, tau)

inside = np.all((z >= reach.lo - 1e-6) & (z <= reach.hi + 1e-6), axis=1)
print(f"{inside.sum()} of {len(z)} end points inside the box")
print("observed spread lo:", np.round(z.min(0), 3))
print("observed spread hi:", np.round(z.max(0), 3))

###############################################################################
# The same engine handles a non-monotone polynomial system whose Jacobian
# bounds depend on the state. Short horizons keep its a-priori enclosure
# finite.

poly = polynomial_model()
box = Box([0.2, -0.4], [0.5, -0.1])
r = over_approximate(poly, box, [0.3], poly.disturbance_space, 0.2).over_box
print("polynomial system:", np.round(r.lo, 4), np.round(r.hi, 4))
