"""
How high must a correlation be before we call it a match?

A labeled sample corpus gives the distribution of correlations between
fingerprints of *different* cameras. The threshold for an error margin r is
the value only r of those mismatches exceed. Fingerprints averaged from
more images are cleaner, so they need different thresholds; the table is
indexed by both fingerprint sizes.
"""
from prnugroups import simkit
from prnugroups.calibration import LabeledPattern, calibrate
from prnugroups.filters import FilterConfig, extract_pattern

SIZE = 128
config = FilterConfig(crop=SIZE)

# a weak pattern shared by all cameras of one model makes large fingerprints
# of different cameras look alike, which is why thresholds rise with size
db = simkit.gen_database(20, 40, SIZE, strength=0.05, rng_seed=2, common_strength=0.01)
samples = [LabeledPattern(d.image_id, d.camera_id, extract_pattern(d.image, config))
           for d in db]

grid = (1, 2, 5, 10, 20, 40)
table = calibrate(samples, grid, r=0.01, trials=2000, rng_seed=2, filter_config=config)

print("threshold(a, b) at 1% false positives")
print("  a\\b " + "".join(f"{b:>8}" for b in grid))
for a in grid:
    print(f"{a:>5} " + "".join(f"{table.cells[(a, b)]:8.4f}" for b in grid))

print(f"\nbetween grid points: threshold(3, 1) = {table.lookup(3, 1):.4f}")
print(f"beyond the grid:     threshold(80, 80) = {table.lookup(80, 80):.4f} (clamped)")
