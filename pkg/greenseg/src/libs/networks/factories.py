from typing import Optional

try:
    from .architectures import build_baseline, build_model_a, build_model_b
    from .enums import Architecture
    from .executor import Network
    from .models import NetworkSpec
except (ImportError, ModuleNotFoundError):
    from architectures import build_baseline, build_model_a, build_model_b
    from enums import Architecture
    from executor import Network
    from models import NetworkSpec


class NetworkFactory:

    in_channels: int

    base_width: Optional[int]
    """overrides the architecture's default width when set"""

    def __init__(self, in_channels: int = 6, base_width: Optional[int] = None) -> None:
        self.in_channels = in_channels
        self.base_width = base_width

    def create_spec(self, arch: Architecture) -> NetworkSpec:
        width = {} if self.base_width is None else {"base_width": self.base_width}
        match arch:
            case Architecture.BASELINE:
                return build_baseline(self.in_channels, **width)
            case Architecture.MODEL_A:
                return build_model_a(self.in_channels, **width)
            case Architecture.MODEL_B:
                return build_model_b(self.in_channels, **width)
            case _:
                raise ValueError(f"Unrecognized architecture: {arch}")

    def create_network(self, arch: Architecture, seed: int = 0) -> Network:
        return Network(self.create_spec(Architecture(arch)), seed=seed)
