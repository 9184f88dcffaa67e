"""The hybrid simulator on its own: a ball with a restitution of 0.8."""
import numpy as np

from romwalk.hybridsim import Edge, HybridSystem, integrate

ball = HybridSystem(
    {"fly": lambda t, x, u: np.array([x[1], -9.81])},
    [Edge("fly", "fly", guard=lambda t, x, u: x[0], direction=-1,
          reset=lambda t, x: np.array([0.0, -0.8 * x[1]]), name="bounce")])

traj = integrate(ball, [1.0, 0.0], "fly", 3.0, max_step=0.01)
for ev in traj.events:
    print(f"bounce at t = {ev.t:.6f} s, rebound {ev.x_post[1]:.4f} m/s")
