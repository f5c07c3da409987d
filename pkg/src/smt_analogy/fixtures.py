"""Hand-encoded Rutherford atom / solar system analogy.

Node numbering follows the classic figure: base (atom) nodes ``[1]..[9]``
and target (solar system) nodes ``[10]..[20]``. Graph ids are zero-based,
so base ``[k]`` is node ``k - 1`` and target ``[k]`` is node ``k - 10``.
Quantities such as masses are leaf entities so that ``greater`` compares
them directly.
"""

from __future__ import annotations

from .dag import SmtDag
from .synth import AnalogyInstance
from .vocab import SignatureVocab

BASE_OFFSET = 1
TARGET_OFFSET = 10

RUTHERFORD_VOCAB = SignatureVocab(
    groups=(("mass", "weight"), ("nucleus",), ("electron",), ("sun",), ("planet",), ("temperature", "heat")),
    dim=32,
    seed=0,
)


def rutherford_instance() -> AnalogyInstance:
    E, R = "entity", "relation"
    atom = SmtDag.build(
        [
            (E, "nucleus"),  # [1]
            (E, "electron"),  # [2]
            (E, "mass"),  # [3] mass of the nucleus
            (E, "mass"),  # [4] mass of the electron
            (R, "attracts"),  # [5] attracts([1], [2])
            (R, "property"),  # [6] property([1], [3])
            (R, "property"),  # [7] property([2], [4])
            (R, "cause"),  # [8] cause([9], [5])
            (R, "greater"),  # [9] greater([3], [4])
        ],
        [(4, 0, 0), (4, 1, 1), (5, 0, 0), (5, 2, 1), (6, 1, 0), (6, 3, 1), (7, 8, 0), (7, 4, 1), (8, 2, 0), (8, 3, 1)],
        "rutherford-atom",
    )
    solar = SmtDag.build(
        [
            (E, "sun"),  # [10]
            (E, "planet"),  # [11]
            (E, "weight"),  # [12] weight of the sun
            (E, "mass"),  # [13] mass of the planet
            (E, "temperature"),  # [14]
            (E, "temperature"),  # [15]
            (R, "attracts"),  # [16] attracts([10], [11])
            (R, "property"),  # [17] property([10], [12])
            (R, "greater"),  # [18] greater([12], [13])
            (R, "greater"),  # [19] greater([14], [15])
            (R, "cause"),  # [20] cause([18], [16])
        ],
        [(6, 0, 0), (6, 1, 1), (7, 0, 0), (7, 2, 1), (8, 2, 0), (8, 3, 1), (9, 4, 0), (9, 5, 1), (10, 8, 0), (10, 6, 1)],
        "solar-system",
    )
    gold = [(0, 0), (1, 1), (2, 2), (3, 3), (4, 6), (5, 7), (7, 10), (8, 8)]
    return AnalogyInstance(atom, solar, tuple(gold), "rutherford")


def base_node(label: int) -> int:
    return label - BASE_OFFSET


def target_node(label: int) -> int:
    return label - TARGET_OFFSET
