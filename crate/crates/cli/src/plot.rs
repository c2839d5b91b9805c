//! A standalone matplotlib script that draws the cloud and a decoded curve.

use std::path::Path;

pub fn script(cloud: &Path, decoded: &Path, image: &Path) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Draws the training cloud and the decoded curve.
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path) as f:
        rows = list(csv.reader(f))[1:]
    return [[float(v) for v in r] for r in rows]


cloud = load({cloud:?})
curve = load({decoded:?})
fig = plt.figure(figsize=(7, 6))
ax = fig.add_subplot(projection="3d") if len(cloud[0]) >= 3 else fig.add_subplot()
cols = list(zip(*cloud))[:3]
ax.scatter(*cols, s=2, alpha=0.25, color="0.5")
ccols = list(zip(*curve))[:3]
ax.plot(*ccols, color="crimson", lw=2)
ax.scatter(*[c[:1] + c[-1:] for c in ccols], color="k", s=25)
fig.tight_layout()
fig.savefig({image:?}, dpi=150)
"#,
        cloud = cloud.display().to_string(),
        decoded = decoded.display().to_string(),
        image = image.display().to_string(),
    )
}
