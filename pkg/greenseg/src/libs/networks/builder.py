from typing import Optional

try:
    from .enums import Architecture, OpKind
    from .models import INPUT, NetworkSpec, Node
except (ImportError, ModuleNotFoundError):
    from enums import Architecture, OpKind
    from models import INPUT, NetworkSpec, Node

LEAKY_SLOPE = 0.1


class GraphBuilder:
    """Accumulates nodes of a layer graph. Every method returns the name of
    the edge it produced."""

    def __init__(self, in_channels: int) -> None:
        self._nodes: list[dict] = []
        self._channels: dict[str, int] = {INPUT: in_channels}

    def channels(self, edge: str) -> int:
        return self._channels[edge]

    def _add(self, name: str, op: OpKind, inputs: tuple[str, ...], channels: int, **attrs) -> str:
        if name in self._channels:
            raise ValueError(f"edge {name!r} already defined")
        self._nodes.append({"name": name, "op": op, "inputs": inputs,
                            "channels": channels, "attrs": attrs})
        self._channels[name] = channels
        return name

    # primitives

    def conv(self,
             name: str,
             x: str,
             cout: int,
             kernel: int = 3,
             stride: int = 1,
             pad=None,
             dilation: int = 1,
             bias: bool = True) -> str:
        if pad is None:
            pad = dilation * (kernel - 1) // 2
        return self._add(name, OpKind.CONV, (x,), cout,
                         cin=self.channels(x), kernel=(kernel, kernel), stride=stride,
                         pad=pad, dilation=dilation, bias=bias)

    def transposed_conv(self, name: str, x: str, cout: int, kernel: int = 2, stride: int = 2) -> str:
        return self._add(name, OpKind.TRANSPOSED_CONV, (x,), cout,
                         cin=self.channels(x), kernel=(kernel, kernel), stride=stride)

    def batch_norm(self, name: str, x: str) -> str:
        return self._add(name, OpKind.BATCH_NORM, (x,), self.channels(x))

    def activation(self, name: str, x: str, slope: float = 0.0) -> str:
        return self._add(name, OpKind.ACTIVATION, (x,), self.channels(x), slope=slope)

    def upsample(self, name: str, x: str) -> str:
        return self._add(name, OpKind.UPSAMPLE, (x,), self.channels(x))

    def max_pool(self, name: str, x: str) -> str:
        return self._add(name, OpKind.MAX_POOL, (x,), self.channels(x), size=2)

    def avg_pool(self, name: str, x: str) -> str:
        return self._add(name, OpKind.AVG_POOL, (x,), self.channels(x), size=2)

    def dropout(self, name: str, x: str, rate: float) -> str:
        if rate <= 0.0:
            return x
        return self._add(name, OpKind.DROPOUT, (x,), self.channels(x), rate=rate)

    def concat(self, name: str, *xs: str) -> str:
        return self._add(name, OpKind.CONCAT, tuple(xs), sum(self.channels(x) for x in xs))

    def add(self, name: str, *xs: str) -> str:
        widths = {self.channels(x) for x in xs}
        if len(widths) != 1:
            raise ValueError(f"{name}: cannot add edges of widths {sorted(widths)}")
        return self._add(name, OpKind.ADD, tuple(xs), widths.pop())

    def mark_skip(self, edge: str) -> None:
        for node in self._nodes:
            if node["name"] == edge:
                node["skip"] = True
                return
        raise KeyError(edge)

    # composite blocks

    def computational_unit(self, name: str, x: str, cout: int) -> str:
        """conv3x3 -> batch norm -> leaky ReLU(0.1), shape preserving"""
        x = self.conv(f"{name}.conv", x, cout)
        x = self.batch_norm(f"{name}.bn", x)
        return self.activation(f"{name}.act", x, LEAKY_SLOPE)

    def computational_block(self, name: str, x: str, cout: int) -> tuple[str, str]:
        """Two units on a residual path; the sum is both output and skip."""
        branch = self.computational_unit(f"{name}.unit1", x, cout)
        branch = self.computational_unit(f"{name}.unit2", branch, cout)
        shortcut = x
        if self.channels(x) != cout:
            shortcut = self.conv(f"{name}.proj", x, cout, kernel=1)
        out = self.add(f"{name}.sum", shortcut, branch)
        return out, out

    def expansive_unit(self, name: str, x: str, cout: int) -> str:
        """Sum of a bilinear + 1x1 path and a 2x2 stride-2 transposed conv path."""
        bilinear = self.upsample(f"{name}.up", x)
        bilinear = self.conv(f"{name}.proj", bilinear, cout, kernel=1)
        transposed = self.transposed_conv(f"{name}.tconv", x, cout)
        return self.add(f"{name}.sum", bilinear, transposed)

    def downsample_block(self, name: str, x: str) -> str:
        """Strided conv, max pool and average pool side by side: C -> 3C at half size."""
        c = self.channels(x)
        strided = self.conv(f"{name}.conv", x, c, kernel=3, stride=2)
        return self.concat(f"{name}.cat", strided,
                           self.max_pool(f"{name}.max", x),
                           self.avg_pool(f"{name}.avg", x))

    def dilated_bottleneck(self, name: str, x: str, c: int) -> str:
        """1x1 projection followed by a serial chain of dilated conv stages
        (dilation 1, 2, 4); the projection and every stage output are summed."""
        stages = [self.conv(f"{name}.b0", x, c, kernel=1)]
        for i, dilation in enumerate((1, 2, 4), start=1):
            y = self.conv(f"{name}.b{i}.conv", stages[-1], c, kernel=3, dilation=dilation)
            y = self.batch_norm(f"{name}.b{i}.bn", y)
            stages.append(self.activation(f"{name}.b{i}.act", y))
        return self.add(f"{name}.sum", *stages)

    def conv_bn_relu(self, name: str, x: str, cout: int, batch_norm: bool = True) -> str:
        x = self.conv(f"{name}.conv", x, cout)
        if batch_norm:
            x = self.batch_norm(f"{name}.bn", x)
        return self.activation(f"{name}.act", x)

    def build(self,
              output: str,
              base_width: int,
              depth: int,
              dropout_rate: float = 0.0,
              arch: Optional[Architecture] = None) -> NetworkSpec:
        return NetworkSpec(
            arch=arch,
            in_channels=self._channels[INPUT],
            base_width=base_width,
            depth=depth,
            dropout_rate=dropout_rate,
            nodes=tuple(Node(**n) for n in self._nodes),
            output=output,
        )
