"""Same score, different distortion: SNR hyperballs and SI-SDR cones.

Run: python demos/01_metrics_and_contours.py
"""

import numpy as np

from reverbsep.contour import si_sdr_contour_points, snr_contour_points
from reverbsep.metrics import alpha_si_sdr, alpha_snr, clamp_db, si_sdr, si_sdr_cosine_form, snr

rng = np.random.default_rng(0)

# A reverberant target is its direct path plus a late tail.
direct = rng.standard_normal(4000)
late = 0.4 * rng.standard_normal(4000)
target = direct + late

print("SNR of the clean direct path against the reverberant target:", round(snr(direct, target), 3))
print("SI-SDR, projection form:", round(si_sdr(direct, target), 6))
print("SI-SDR, cosine form:    ", round(si_sdr_cosine_form(direct, target), 6))

# Three estimates with identical SNR against the target. Only the first one
# is the thing we actually want.
ball = snr_contour_points(direct, late)
print("\nSNR contour")
for p in ball.points:
    print(f"  {p.label:17s} SNR {p.metric_value:7.3f} dB   TSNR {clamp_db(p.direct_quality):8.3f} dB")

cone = si_sdr_contour_points(direct, late, count=4)
print("\nSI-SDR contour")
for p in cone.points:
    print(f"  {p.label:17s} SI-SDR {p.metric_value:7.3f} dB   TSI-SDR {clamp_db(p.direct_quality):8.3f} dB")

# The alpha-balanced variants cap the score of a perfect estimate at 10 log10(1/alpha).
for alpha in (0.1, 0.3, 1.0, 3.0):
    print(f"alpha={alpha:<4}  perfect alpha-SNR {alpha_snr(target, target, alpha):7.3f} dB"
          f"  perfect alpha-SI-SDR {alpha_si_sdr(target, target, alpha):7.3f} dB")
