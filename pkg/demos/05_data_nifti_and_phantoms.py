"""Data: NIfTI-1 volumes, conditions, and synthetic phantoms.

Real training pairs come from NIfTI-1 image/label volumes: intensities are
min-max normalised, axial slices resized, and the chosen labels turned into
a single rank-scaled condition channel. For work without a real dataset the
package generates phantoms: ellipses with a label each, rendered into an
image with a label-dependent intensity and a faint texture.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from maskgan.data import (LabelMap, PhantomSpec, Volume, header_summary, load_phantom,
                          make_condition, parse_nifti, phantom_pair, write_nifti,
                          write_phantom)

# A 3x2x1 int16 volume with a scale of 2 and an offset of 1.
vol = Volume((3, 2, 1), (1.0, 1.0, 2.5), np.arange(6.0), datatype=4,
             scl_slope=2.0, scl_inter=1.0)
data = write_nifti(vol, byteorder=">")
print(header_summary(data))
print("scaled voxels:", parse_nifti(data).voxels)

# %%
# Conditions: each selected structure gets rank / K.
labels = LabelMap({"Myo": 205, "LA": 420, "LV": 500, "RA": 550, "RV": 600,
                   "Ao": 820, "PA": 850})
slice_ = np.array([[0, 205, 500], [850, 600, 0]])
print(make_condition(slice_, "WH", labels))
print(make_condition(slice_, ["LV", "RV"], labels))

# %%
# Phantoms are a pure function of (seed, index): the on-disk form is just a
# manifest plus cached arrays, and reloading regenerates identical pairs.
spec = PhantomSpec(size=64, seed=3)
pair = phantom_pair(spec, 0)
print("phantom pair", pair.condition.shape, pair.target.shape,
      "condition levels:", np.unique(pair.condition))
with tempfile.TemporaryDirectory() as tmp:
    write_phantom(spec, 10, Path(tmp))
    again = load_phantom(Path(tmp))
    print("reloaded", len(again), "pairs; first identical:",
          np.array_equal(again[0].target, pair.target))
