"""Reference ANN algorithms: one exact baseline plus a tree-, graph-, and
hash-based approximate method.

Every algorithm follows the same in-process calling convention the runner
expects:

    alg = Constructor(metric, ...)      # args come from config expansion
    alg.build(train)
    alg.set_query_params(*group)        # may be called again on a built index
    ids_and_distances = alg.query(q, k)
    alg.stats()                         # {"candidates": total, ...}

``batch_query(queries, k)`` plus ``get_batch_results()`` is optional and
only present on algorithms that genuinely support whole-set delivery.
"""

from .bitsampling import BitSampling
from .exact import BruteForce
from .knngraph import KnnGraph
from .rpforest import RPForest

REGISTRY = {
    "bruteforce": BruteForce,
    "rpforest": RPForest,
    "knngraph": KnnGraph,
    "bitsampling": BitSampling,
}

# both spellings resolve from config files
bruteforce = BruteForce
rpforest = RPForest
knngraph = KnnGraph
bitsampling = BitSampling

__all__ = ["BruteForce", "RPForest", "KnnGraph", "BitSampling", "REGISTRY",
           "bruteforce", "rpforest", "knngraph", "bitsampling"]
