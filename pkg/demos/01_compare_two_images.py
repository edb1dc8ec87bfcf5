"""
Do two photos come from the same camera?

Two synthetic cameras take a few pictures each. We extract the noise
pattern of every picture and look at pairwise correlations: pictures from
the same sensor share its PRNU and correlate clearly, pictures from
different sensors hover around zero.
"""
import numpy as np

from prnugroups import simkit
from prnugroups.filters import FilterConfig, extract_pattern
from prnugroups.fingerprint import corr2

SIZE = 256
config = FilterConfig(crop=SIZE)

db = simkit.gen_database(2, 3, SIZE, strength=0.05, rng_seed=1)
patterns = [extract_pattern(d.image, config) for d in db]

print("pairwise correlation of noise patterns")
print(" " * 14 + "".join(f"{d.image_id:>14}" for d in db))
for d, p in zip(db, patterns):
    row = "".join(f"{corr2(p, q):14.3f}" for q in patterns)
    print(f"{d.image_id:>14}{row}")

same = [corr2(patterns[i], patterns[j]) for i in range(6) for j in range(i + 1, 6)
        if db[i].camera_id == db[j].camera_id]
diff = [corr2(patterns[i], patterns[j]) for i in range(6) for j in range(i + 1, 6)
        if db[i].camera_id != db[j].camera_id]
print(f"\nsame camera:      mean {np.mean(same):.3f}")
print(f"different camera: mean {np.mean(diff):.3f}")
