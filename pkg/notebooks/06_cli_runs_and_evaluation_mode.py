# %% [markdown]
# # Command line: replicated runs and evaluation-only mode
#
# `partx run` writes a leaf dump per replication, a one-row summary and a
# manifest.  `partx evaluate` classifies an existing sample file without new
# evaluations.  Both are called through `main` here so the notebook stays in
# one process.

# %%
import csv
import tempfile
from pathlib import Path

import numpy as np
import yaml

from partx.bench import himmelblau_shifted
from partx.cli import main

work = Path(tempfile.mkdtemp())
cfg = work / "run.yaml"
cfg.write_text(yaml.safe_dump({"problem": "himmelblau", "partx": {"T": 600, "macro_reps": 2}}))
main(["run", "--config", str(cfg), "--out", str(work / "run")])
print((work / "run" / "summary.csv").read_text())

# %%
rows = list(csv.reader(open(work / "run" / "leaves_rep000.csv")))
print(rows[0])
print(rows[1])

# %% [markdown]
# Evaluation-only mode on 2,000 uniform samples.

# %%
rng = np.random.default_rng(0)
x = rng.uniform(-5, 5, (2000, 2))
with open(work / "samples.csv", "w") as fh:
    fh.write("x1,x2,value\n")
    for a, b in x:
        fh.write(f"{float(a)!r},{float(b)!r},{himmelblau_shifted(a, b)!r}\n")
main(["evaluate", str(work / "samples.csv"), "--problem", "himmelblau", "--out", str(work / "eval")])
print((work / "eval" / "summary.csv").read_text())
