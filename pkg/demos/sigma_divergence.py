"""How fast does the variance of the truncated field blow up?

sigma_n(t) = E[Psi_n(t, x)^2] is computed by quadrature for a few Hurst
vectors in d = 2.  Below the critical sum it grows like 2^{kappa n}; at the
white-noise border it grows linearly in n.
"""

import numpy as np

from fracwave.lattice import HurstVector
from fracwave.renorm import sigma_asymptotic_fit, sigma_curve

levels = range(2, 10)
times = [0.5, 0.75, 1.0]

for h in [(0.4, 0.4, 0.4), (0.45, 0.45, 0.45), (0.3, 0.5, 0.5), (0.5, 0.5, 0.5), (0.8, 0.8, 0.8)]:
    hurst = HurstVector(h)
    curve = sigma_curve(hurst, levels, times)
    fit = sigma_asymptotic_fit(curve)
    at_one = curve.sigma[:, -1]
    print(f"H={h}  regime={hurst.regime.value:<11} kappa={hurst.kappa:+.3f}")
    print("   sigma_n(1) for n=2..9:", np.array2string(at_one, precision=4))
    print(f"   growth: {fit.regime.value}, fitted rate {fit.fitted_rate:+.3f}")
