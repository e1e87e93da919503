import json
from collections import Counter
from typing import Any, Optional

import pydantic

try:
    from .enums import Architecture, OpKind
except (ImportError, ModuleNotFoundError):
    from enums import Architecture, OpKind

INPUT = "input"


class Node(pydantic.BaseModel):
    """One graph operation. Its output edge carries the node name."""
    model_config = pydantic.ConfigDict(frozen=True)

    name: str
    op: OpKind
    inputs: tuple[str, ...]
    channels: int
    """output channel count"""
    attrs: dict[str, Any] = pydantic.Field(default_factory=dict)
    skip: bool = False
    """output is an encoder skip consumed by the decoder"""

    @pydantic.field_validator("attrs")
    @classmethod
    def _tuples(cls, attrs: dict[str, Any]) -> dict[str, Any]:
        # JSON round trips turn tuples into lists
        return {k: tuple(v) if isinstance(v, list) else v for k, v in attrs.items()}

    def param_shapes(self) -> dict[str, tuple[tuple[int, ...], bool]]:
        """Parameter name -> (shape, trainable)"""
        if not self.op.has_params():
            return {}
        if self.op is OpKind.BATCH_NORM:
            c = (self.channels,)
            return {
                f"{self.name}.gamma": (c, True),
                f"{self.name}.beta": (c, True),
                f"{self.name}.running_mean": (c, False),
                f"{self.name}.running_var": (c, False),
            }
        kh, kw = self.attrs["kernel"]
        cin = self.attrs["cin"]
        # transposed kernels are stored (cin, cout, kh, kw)
        weight = (self.channels, cin, kh, kw) if self.op is OpKind.CONV else (cin, self.channels, kh, kw)
        shapes = {f"{self.name}.weight": (weight, True)}
        if self.attrs.get("bias", True):
            shapes[f"{self.name}.bias"] = ((self.channels,), True)
        return shapes


class NetworkSpec(pydantic.BaseModel):
    """Declarative layer graph. Nodes are stored in execution order."""
    model_config = pydantic.ConfigDict(frozen=True)

    arch: Optional[Architecture] = None
    in_channels: int = 6
    base_width: int
    depth: int
    dropout_rate: float = 0.0
    nodes: tuple[Node, ...]
    output: str

    @pydantic.model_validator(mode="after")
    def _check_graph(self) -> "NetworkSpec":
        if self.depth < 2:
            raise ValueError(f"depth must be >= 2, got {self.depth}")
        known = {INPUT}
        for node in self.nodes:
            missing = [e for e in node.inputs if e not in known]
            if missing:
                raise ValueError(f"node {node.name!r} reads undefined edges {missing}")
            if node.name in known:
                raise ValueError(f"duplicate edge name {node.name!r}")
            known.add(node.name)
        if self.output not in known:
            raise ValueError(f"output edge {self.output!r} is not produced")

        concat_uses = Counter(e for n in self.nodes if n.op is OpKind.CONCAT for e in n.inputs)
        for node in self.nodes:
            if node.skip and concat_uses[node.name] != 1:
                raise ValueError(
                    f"skip {node.name!r} has {concat_uses[node.name]} decoder consumers, expected 1")

        head = self.node(self.output)
        if self.arch is not None and not (
                head.op is OpKind.CONV and head.channels == 1 and tuple(head.attrs["kernel"]) == (1, 1)):
            raise ValueError("output head must be a 1x1 convolution to one channel")
        return self

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)

    def audit(self, prefix: str = "") -> Counter:
        """Count operation kinds, optionally only under a name prefix."""
        return Counter(n.op for n in self.nodes if n.name.startswith(prefix))

    def param_shapes(self) -> dict[str, tuple[tuple[int, ...], bool]]:
        shapes = {}
        for node in self.nodes:
            shapes.update(node.param_shapes())
        return dict(sorted(shapes.items()))

    def summary(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)


class ParameterReport(pydantic.BaseModel):
    arch: Optional[Architecture]
    total: int
    trainable: int
    published_total: Optional[int] = None
    published_trainable: Optional[int] = None

    @property
    def trainable_delta(self) -> Optional[int]:
        if self.published_trainable is None:
            return None
        return self.trainable - self.published_trainable

    @property
    def trainable_delta_pct(self) -> Optional[float]:
        if self.published_trainable is None:
            return None
        return 100.0 * self.trainable_delta / self.published_trainable
