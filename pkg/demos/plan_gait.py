"""Plan a periodic gait and a lateral P2 orbit, then print a short audit.

    python3 demos/plan_gait.py [speed]
"""
import sys

from romwalk.planner import GaitSpec, audit_periodic, identify_p2_orbit, plan_periodic_aslip
from romwalk.rom import RomParams, SpringLaw


def main(speed=0.5):
    p, law = RomParams(), SpringLaw()
    gait = plan_periodic_aslip(GaitSpec(speed=speed), p, law)
    audit = audit_periodic(gait)
    print(f"step length {gait.step_length:.3f} m, mean height {gait.z0:.3f} m")
    for k, v in sorted(audit.items()):
        if isinstance(v, float):
            print(f"  {k:<12} {v:+.2e}")
    orbit = identify_p2_orbit(p.with_height(gait.z0), gait.ssp.duration, gait.dsp.duration, 0.2)
    print(f"P2 orbit: sigma2 = {orbit.sigma2:.4f}, y0 = {orbit.y0:.4f} m, ydot0 = {orbit.yd0:.4f} m/s")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.5)
