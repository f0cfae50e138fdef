# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

from isorecon.normals import PAIR_SOLVERS

solvers = dict(PAIR_SOLVERS)

# name -> (images, points, contamination)
scenes = {
    "clean-7x200": (7, 200, 0.0),
    "contaminated-7x200": (7, 200, 0.3),
    "clean-14x200": (14, 200, 0.0),
}

pair_counts = [1, 50]
