"""Configuration of the featurizer and the message-passing networks"""

from enum import Enum

from pydantic import BaseModel, ConfigDict

from enflow.errors import ConfigError


class FeaturizerConfig(BaseModel):
    """
    Radial basis, cutoff and direction clamping of pair features.

    bond_channel appends a 0/1 column marking bonded pairs to the radial basis.
    """

    model_config = ConfigDict(frozen=True)

    n_rbf: int = 32
    d_cutoff: float = 5.0
    eps_norm: float = 0.01
    bond_channel: bool = True

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.n_rbf < 1:
            raise ConfigError(f"n_rbf must be at least 1, got {self.n_rbf}")
        if not self.d_cutoff > 0:
            raise ConfigError(f"d_cutoff must be positive, got {self.d_cutoff}")
        if not self.eps_norm > 0:
            raise ConfigError(f"eps_norm must be positive, got {self.eps_norm}")

    @property
    def edge_dim(self) -> int:
        """Width of the per-pair features"""
        return self.n_rbf + (1 if self.bond_channel else 0)


class NetKind(str, Enum):
    """Which head a network instance exposes"""

    VECTOR = "vector"
    ENERGY = "energy"


class NetConfig(BaseModel):
    """Shape of one network instance"""

    model_config = ConfigDict(frozen=True)

    kind: NetKind = NetKind.VECTOR
    hidden: int = 64
    n_layers: int = 3
    n_atom_types: int = 8
    time_freqs: int = 4
    use_time: bool = True
    featurizer: FeaturizerConfig = FeaturizerConfig()

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.hidden < 1:
            raise ConfigError(f"hidden must be at least 1, got {self.hidden}")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be at least 1, got {self.n_layers}")
        if self.n_atom_types < 1:
            raise ConfigError(f"n_atom_types must be at least 1, got {self.n_atom_types}")
        if self.use_time and self.time_freqs < 1:
            raise ConfigError("A time-conditioned network needs at least one frequency")
        self.featurizer.check()

    @property
    def time_dim(self) -> int:
        """Width of the sinusoidal time features"""
        return 2 * self.time_freqs if self.use_time else 0

    @classmethod
    def vector_field(cls, **kwargs: object) -> "NetConfig":
        """Time-conditioned network with the vector head"""
        return cls.model_validate({**kwargs, "kind": NetKind.VECTOR, "use_time": True})

    @classmethod
    def energy_model(cls, **kwargs: object) -> "NetConfig":
        """Time-free network with the scalar energy head"""
        return cls.model_validate({**kwargs, "kind": NetKind.ENERGY, "use_time": False})
