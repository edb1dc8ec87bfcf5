"""
Why the differential filters?

The wavelet denoiser gives the cleanest residual but is expensive. The
second and fourth order differential filters are a single small stencil,
and for grouping a large database that speed matters more.
"""
import numpy as np

from prnugroups import simkit
from prnugroups.cli import bench_filters
from prnugroups.filters import extract_noise

SIZE = 1024
cam = simkit.gen_camera(5, SIZE, 0.05)
images = []
for i in range(5):
    rng = np.random.default_rng([5, i])
    images.append(simkit.gen_image(cam, simkit.gen_scene(SIZE, rng), 40.0, rng))

report = bench_filters(images)
for kind, t in report["median_s"].items():
    print(f"{kind:>8}: {t * 1000:7.1f} ms per {SIZE}x{SIZE} image")
print(f"wavelet is {report['ratio_wavelet_to_sod']:.1f}x slower than sod "
      f"and {report['ratio_wavelet_to_fod']:.1f}x slower than fod")

# what each filter leaves of the sensor pattern
img = images[0]
for kind in ("sod", "fod", "wavelet"):
    n = extract_noise(img, kind)
    c = np.corrcoef(n.ravel(), (img * cam.prnu).ravel())[0, 1]
    print(f"{kind:>8}: residual vs scene*PRNU corr {c:.3f}")
