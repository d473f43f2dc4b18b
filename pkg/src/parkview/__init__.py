from .config import Config, load_config
from .interleaving import Interleaving, ShiftMap
from .mergetree import OrderedMergeTree, TreePoint

__all__ = ["Config", "Interleaving", "OrderedMergeTree", "ShiftMap", "TreePoint", "load_config"]
