"""
Scoring credal partitions
=========================

Accuracy and the pair-counting scores extend to set-valued decisions: an
object is correct when its subset contains the true label, and two objects
agree when their subsets intersect. Hard partitions are the special case of
singleton subsets, where the scores reduce to the classical ones.
"""

import numpy as np

from mvlrecm import evaluate, parse_subset
from mvlrecm.metrics import best_mapping, LabeledSolution, pair_confusion

truth = np.array([1, 1, 2])
solution = np.array([parse_subset(s) for s in ("{1}", "{1,2}", "{2}")])
pc = pair_confusion(truth, solution)
print("three objects:", pc)

# a solution whose cluster names are permuted; Hungarian matching undoes it
truth = np.array([1, 1, 1, 2, 2, 3, 3, 3])
solution = np.array([parse_subset(s) for s in ("3", "3", "{2,3}", "1", "1", "2", "2", "{}")])
sol = LabeledSolution(truth, solution)
print("solution cluster -> true label:", best_mapping(sol) + 1)
for k, v in evaluate(truth, solution).to_dict().items():
    print(f"  {k:>9} = {v:.4f}")

# the same labels as a hard partition
hard = np.array([parse_subset(s) for s in ("3", "3", "3", "1", "1", "2", "2", "2")])
print("hard version:", {k: round(v, 4) for k, v in evaluate(truth, hard).to_dict().items()})
