"""Exceptions raised by the enflow library"""


class EnflowError(Exception):
    """Base class for every error raised by enflow"""


class InvalidConformation(EnflowError, ValueError):
    """Coordinates are not a finite n x 3 matrix"""


class DisconnectedGraph(EnflowError, ValueError):
    """The molecular graph has more than one connected component"""


class EmptyEnsemble(EnflowError, ValueError):
    """An ensemble or conformer set has no members"""


class MissingLabels(EnflowError, ValueError):
    """Energies or weights are required but absent"""


class ShapeError(EnflowError, ValueError):
    """Array shapes are incompatible"""


class NonScalarLoss(EnflowError, ValueError):
    """Gradients were requested for a tensor that is not a scalar"""


class ModelError(EnflowError, ValueError):
    """Parameters, graph and conformation do not fit together"""


class EmptyBatch(EnflowError, ValueError):
    """A loss was evaluated on an empty batch"""


class EmptyDataset(EnflowError, ValueError):
    """A dataset has no molecules"""


class ConfigError(EnflowError, ValueError):
    """A configuration value violates its invariants"""


class InsufficientSamples(EnflowError, ValueError):
    """Fewer generated conformers than the evaluation protocol requires"""


class CheckpointError(EnflowError, ValueError):
    """A checkpoint file is corrupt or has an unknown format"""


class DatasetFormatError(EnflowError, ValueError):
    """A JSON-lines dataset record is malformed"""


class InvalidWeights(EnflowError, ValueError):
    """Boltzmann weights are negative or do not sum to one"""
