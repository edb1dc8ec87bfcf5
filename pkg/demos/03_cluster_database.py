"""
Group an unlabeled folder of images by camera.

We write a shuffled synthetic database to disk, calibrate thresholds on a
separate corpus, and let the block-wise grouping sort it out. Each group
reports where its members came from so we can compare with the truth.
"""
import collections
import tempfile

import numpy as np

from prnugroups import simkit
from prnugroups.calibration import LabeledPattern, calibrate
from prnugroups.clustering import ClusterConfig, cluster_database
from prnugroups.filters import extract_pattern

SIZE = 128
config = ClusterConfig(block_size=20, crop=SIZE, rng_seed=3)

train = simkit.gen_database(20, 20, SIZE, 0.05, rng_seed=30)
samples = [LabeledPattern(d.image_id, d.camera_id, extract_pattern(d.image, config.filter_config))
           for d in train]
table = calibrate(samples, (1, 2, 5, 10, 20), 0.01, 1000, rng_seed=30,
                  filter_config=config.filter_config)

db = simkit.gen_database(4, 10, SIZE, 0.05, rng_seed=31)
db = [db[i] for i in np.random.default_rng(0).permutation(len(db))]
with tempfile.TemporaryDirectory() as d:
    paths = simkit.write_corpus(db, d)
    truth = {p: im.camera_id for p, im in zip(paths, db)}
    result = cluster_database(paths, config, table)

print(f"{len(paths)} images in blocks of {result.block_sizes}, {len(result.groups)} groups")
for g in result.groups:
    cams = collections.Counter(truth[m] for m in g.members)
    print(f"  group {g.id:>2} size {g.size:>2} block {g.block_of_origin!s:>6}  {dict(cams)}")
print("timing (s):", {k: round(v, 3) for k, v in result.timing.items()})
