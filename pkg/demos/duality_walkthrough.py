"""One pass through the deterministic duality machinery on a random matrix.

Builds the test projection for A - zI, its dual basis and the perturbed
sequence W, buckets both into dyadic classes, then runs the witness and
the reduction to the discrete set on a planted membership instance.
"""

import math

import numpy as np

from nogaps import duality as du
from nogaps.core import Ellipsoid
from nogaps.harness import pipeline_instance

rng = np.random.default_rng(5)
n, N, delta = 40, 5, 1e-2
A = rng.standard_normal((n, n))
z = math.sqrt(n)

ctx = du.build_test_projection(A, z, N)
dual = du.dual_basis(ctx)
print("biorthogonality error", du.biorthogonality_error(ctx.U, dual.V))

W = du.perturbed_dual(dual, z, delta)
order = du.sigma_order(W.W)
print("greedy order", order.sigma, "distances", np.round(order.d, 4))
print("volume identity gap", du.volume_identity_gap(W.W, order))

R = 1 / (delta * math.sqrt(N))
cb = du.classify_ellipsoid(Ellipsoid(ctx.U), R)
cp, res = du.check_ellipsoid_to_distance(W, cb)
print("ellipsoid class", cb.b, "-> distance class", cp.p, "slack", round(res.slack, 4))

# planted instance: the last vector sits close to the span of the others
inst = pipeline_instance(rng, False, n=20, N=4)
Wp, dp = inst["W"], inst["delta_prime"]
cert = du.reduce_to_upsilon(Wp, inst["Ys"], min(inst["delta"], inst["dist"]), dp)
print("witness norm", round(float(np.linalg.norm(inst["Y"])), 4), "cap", round(inst["T"], 4))
print("reduced vector: J", cert.J, "lattice labels", cert.k, "norm cap", round(cert.T, 4))
print("member of the discrete set:", du.verify_upsilon(Wp, cert.Z, dp, cert.T).member)
