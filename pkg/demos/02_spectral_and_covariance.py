"""From a network's Jordan data to its asymptotic covariance report.

The second-order behavior of the coupled (inclination, action-mean) process
is governed by the step-size exponent gamma, the constant c, and the second
largest real part tau of the weight spectrum.  Three regimes arise:

  * gamma < 1              -- subpolynomial: rank-one covariance for the
                              synchronized component, chain covariance at a
                              faster rate,
  * gamma = 1, tau below   -- sqrt(n) fluctuations with full chain coupling,
    1 - 1/(2c)
  * gamma = 1, tau at the  -- logarithmic corrections; only the deepest
    boundary                  Jordan chains survive in the limit.

Run:  python demos/02_spectral_and_covariance.py
"""

import numpy as np

from hiernet import (
    StepSizeSchedule,
    build_example1,
    build_example2,
    classify_regime,
    covariance_report,
)

np.set_printoptions(precision=4, suppress=True, linewidth=120)

# -- two-group network, gamma = 1, c = 2: subcritical ------------------------
network, spectral = build_example2(2, 2, alpha=0.6, beta=0.3)
schedule = StepSizeSchedule(gamma=1.0, c=2.0)
print("two-group network: tau =", spectral.tau, "->", classify_regime(1.0, 2.0, spectral).value)

report = covariance_report(spectral, schedule)
print("scaling:", report.scaling)
print("inclination-deviation covariance (per unit mixture):")
print(report.blocks["Sigma_ZZ"])
print("joint 2N x 2N covariance is PSD:", np.linalg.eigvalsh(report.joint).min() >= -1e-8)
print()

# -- cascade network at the critical boundary --------------------------------
# one chain of order N-1 = 2 at eigenvalue 1 - alpha = 0.5; with c = 1 the
# boundary condition lambda + lambda = 2 - 1/c holds and the limit keeps only
# the chain-tail coordinate, scaled by sqrt(n)/(log n)^(rho - 1/2)
network1, spectral1 = build_example1(3, alpha=0.5)
schedule1 = StepSizeSchedule(gamma=1.0, c=1.0)
print("cascade network: tau =", spectral1.tau, "rho =", spectral1.rho,
      "->", classify_regime(1.0, 1.0, spectral1).value)
report1 = covariance_report(spectral1, schedule1)
print("scaling:", report1.scaling)
print("chain-space S*_ZZ (sparse, chain-tail entry only):")
print(np.real(report1.blocks["S_ZZ_star"]))
