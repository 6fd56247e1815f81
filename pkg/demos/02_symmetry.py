"""Why symmetrize: detection delay in both directions of the same change.

N(1,1) -> N(2,2) and N(2,2) -> N(1,1) have the same symmetric divergence but
very different one-sided KL divergences.  Classical CUSUM inherits that
asymmetry; DAS-CUSUM's increment has the same post-change mean either way.
"""

# %%
import math

from dascusum import DetectorConfig, GaussianParams, estimate_edd, kl_gaussian, symmetric_kl
from dascusum.tuning import delta0_star, threshold_for_arl, v_star

a, b = GaussianParams(1, 1), GaussianParams(2, 2)
print(f"KL(b||a)={kl_gaussian(b, a):.3f}  KL(a||b)={kl_gaussian(a, b):.3f}  symmetric={symmetric_kl(a, b):.3f}")

# %%
w = 40
d0 = delta0_star(1.0, w)
das = DetectorConfig(threshold=threshold_for_arl(5000, d0), window=w, drift=v_star(d0, w))
trials = 500

for name, pre, post in (("a -> b", a, b), ("b -> a", b, a)):
    e_das = estimate_edd(das, pre, post, "das", trials, seed=3)
    cu = DetectorConfig(threshold=math.log(5000), post_change=post)
    e_cu = estimate_edd(cu, pre, post, "cusum", trials, seed=3)
    print(f"{name}: DAS EDD {e_das.value:6.2f} +/- {e_das.std_error:.2f}   CUSUM EDD {e_cu.value:6.2f} +/- {e_cu.std_error:.2f}")
