"""Keys used by the JSON-lines and checkpoint serialization"""

from enum import Enum


class SerializationKeys(Enum):
    """Value used as the keys for the serialization"""

    MOL_ID = "mol_id"
    ATOM_TYPES = "atom_types"
    BONDS = "bonds"
    CONFORMERS = "conformers"
    COORDS = "coords"
    ENERGY = "energy"
    WEIGHT = "weight"
    GEN_META = "gen_meta"
    N_STEPS = "n_steps"
    AMPLITUDE = "amplitude"
    GUIDED = "guided"
    SEED = "seed"
    MODE = "mode"
    ENSEMBLE_SIZE = "ensemble_size"
    PREDICTED_ENERGY = "predicted_energy"

    # Checkpoint payload
    THETA = "theta"
    PHI = "phi"
    CONFIG = "config"
    TENSORS = "tensors"
    SHAPE = "shape"
    DATA = "data"
    META = "meta"
