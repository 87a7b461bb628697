"""The ``maskgan`` command line, driven from Python.

Each subcommand is also reachable as ``maskgan <command>`` or
``python3 -m maskgan <command>``. Here the entry point is called directly so
the whole walk-through stays in one temporary directory.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from maskgan.cli import main
from maskgan.data import Volume, write_nifti

tmp = Path(tempfile.mkdtemp())
tiny = ["--image_size=32", "--depth=3", "--base_channels=4", "--channel_cap=8",
        "--disc_channels=4,4,8,8,1", "--batch_size=4", "--phantom_count=24",
        "--heldout_count=4", "--grid_samples=2"]

# %%
# 1. A short training run. Any config key can be overridden as --key=value.
code = main(["train", f"--out={tmp / 'run'}", "--iterations=20", "--milestones=0,20",
             "--quiet", *tiny])
print("train exit code:", code)
print((tmp / "run" / "resolved.cfg").read_text().splitlines()[:6])

# %%
# 2. Fresh masks, then generate images from the final checkpoint.
main(["phantom", "--count=4", "--size=32", "--seed=99", f"--out={tmp / 'masks'}"])
main(["sample", f"--checkpoint={tmp / 'run' / 'checkpoint_final.mfg'}",
      f"--masks={tmp / 'masks'}", f"--out={tmp / 'samples'}"])
print(sorted(p.name for p in (tmp / "samples").iterdir()))

# %%
# 3. Configuration mistakes are reported with their line and exit code 1.
bad = tmp / "bad.cfg"
bad.write_text("lr=0.001\nbatch_size=sixteen\n")
print("exit code:", main(["train", f"--config={bad}", f"--out={tmp / 'x'}"]))

# %%
# 4. The gradient checker, and NIfTI header inspection.
main(["gradcheck", "--instances=1", f"--out={tmp / 'gc'}"])

vol = Volume((2, 2, 1), (1.0, 1.0, 1.0), np.array([0.0, 0.25, 0.5, 1.0]))
(tmp / "tiny.nii").write_bytes(write_nifti(vol))
main(["nifti-info", str(tmp / "tiny.nii")])
