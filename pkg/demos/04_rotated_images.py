"""
Portrait shots are stored rotated; the sensor pattern turns with them.

Half of one camera's pictures are saved rotated a quarter turn. Within a
block they form their own group, and the cross-block merge finds them again
by trying all four rotations of one fingerprint against the other.
"""
from prnugroups import simkit
from prnugroups.fingerprint import (Fingerprint, Rotation, average_into, best_rotation_corr,
                                    corr2, rotate)
from prnugroups.filters import FilterConfig, extract_pattern

SIZE = 128
config = FilterConfig(crop=SIZE)
db = simkit.gen_database(1, 10, SIZE, 0.05, rng_seed=4)
pats = [extract_pattern(d.image, config) for d in db]

upright = Fingerprint.single(pats[0], "0")
for i in range(1, 5):
    upright = average_into(upright, pats[i], str(i))

turned = Fingerprint.single(rotate(pats[5], Rotation.R90), "5")
for i in range(6, 10):
    turned = average_into(turned, rotate(pats[i], Rotation.R90), str(i))

print(f"as stored:        corr = {corr2(upright.pattern, turned.pattern):.3f}")
r, c = best_rotation_corr(upright, turned)
print(f"best of 4 turns:  corr = {c:.3f} after rotating the second by {r.name}")
