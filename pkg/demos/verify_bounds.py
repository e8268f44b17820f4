"""Cross-check the accounting routes against each other on a few points.

Three independent routes to the same number exist for the exact curve:
the closed-form tail sums, adaptive quadrature of the integrand, and a
direct hockey-stick evaluation of the constructed mixture pair. The
first two must agree to near machine precision; the third must never
exceed the closed form by more than its own tolerance.
"""

import itertools
import math

from fedamp import SamplingParams, delta_main, hockey_stick, worst_case_pair
from fedamp.accountant import delta_main_quadrature
from fedamp.divergence import HockeyStickQuery

points = list(
    itertools.product((0.05, 0.3), (0.05, 0.3), (1, 50), (0.8, 2.0), (0.1, 0.6))
)

worst_quad = 0.0
worst_pair = -math.inf
for p, q, d, sigma, eps in points:
    params = SamplingParams(p=p, q=q, d=d, C=1.0, sigma=sigma)
    closed = delta_main(params, eps).delta
    quad = delta_main_quadrature(params, eps)
    worst_quad = max(worst_quad, abs(closed - quad))
    xi, xi_prime = worst_case_pair(params)
    oracle = hockey_stick(HockeyStickQuery(math.exp(eps), xi, xi_prime))
    worst_pair = max(worst_pair, oracle - closed)

print(f"{len(points)} points")
print(f"max |closed - quadrature|      : {worst_quad:.3e}")
print(f"max (pair oracle - closed form): {worst_pair:.3e}")
print()
print("The pair oracle staying at or below the closed form means every")
print("certified (eps, delta) is honest for the constructed pair. Note the")
print("looser comparison schemes do not sandwich the exact curve everywhere;")
print("`fedamp verify` reports the ordering point by point, and the README")
print("discusses where and why it fails.")
