try:
    from .builder import GraphBuilder
    from .enums import Architecture
    from .models import INPUT, NetworkSpec
except (ImportError, ModuleNotFoundError):
    from builder import GraphBuilder
    from enums import Architecture
    from models import INPUT, NetworkSpec


def build_baseline(in_ch: int = 6,
                   base_width: int = 16,
                   dropout_rate: float = 0.1,
                   batch_norm: bool = False) -> NetworkSpec:
    """Five-level U-Net with widths base * {1, 2, 4, 8, 16}.

    Up-steps are bilinear upsampling followed by a 2x2 convolution that
    halves the width. Batch norm is off by default, which keeps every
    parameter trainable.
    """
    if base_width < 1:
        raise ValueError(f"base_width must be >= 1, got {base_width}")
    g = GraphBuilder(in_ch)
    widths = [base_width * 2 ** i for i in range(5)]

    x, skips = INPUT, []
    for level, width in enumerate(widths[:-1]):
        x = g.conv_bn_relu(f"enc{level}.c1", x, width, batch_norm)
        x = g.conv_bn_relu(f"enc{level}.c2", x, width, batch_norm)
        g.mark_skip(x)
        skips.append(x)
        x = g.max_pool(f"enc{level}.pool", x)
        x = g.dropout(f"enc{level}.drop", x, dropout_rate)

    x = g.conv_bn_relu("bottleneck.c1", x, widths[-1], batch_norm)
    x = g.conv_bn_relu("bottleneck.c2", x, widths[-1], batch_norm)

    for level in reversed(range(len(skips))):
        width = widths[level]
        x = g.upsample(f"dec{level}.up", x)
        x = g.conv(f"dec{level}.upconv", x, width, kernel=2, pad=(0, 1, 0, 1))
        x = g.activation(f"dec{level}.upact", x)
        x = g.concat(f"dec{level}.cat", x, skips[level])
        x = g.conv_bn_relu(f"dec{level}.c1", x, width, batch_norm)
        x = g.conv_bn_relu(f"dec{level}.c2", x, width, batch_norm)

    out = g.conv("head", x, 1, kernel=1)
    return g.build(out, base_width, depth=5, dropout_rate=dropout_rate, arch=Architecture.BASELINE)


def build_model_a(in_ch: int = 6,
                  base_width: int = 32,
                  dropout_rate: float = 0.1) -> NetworkSpec:
    """Residual U-Net: 7x7 stem, three residual encoder levels, a residual
    bottleneck and decoder levels whose up-steps combine bilinear and
    transposed-conv paths."""
    g = GraphBuilder(in_ch)
    widths = [base_width, base_width * 2, base_width * 4]

    x = g.conv("stem", INPUT, base_width, kernel=7)
    skips = []
    for level, width in enumerate(widths):
        x, skip = g.computational_block(f"enc{level}", x, width)
        g.mark_skip(skip)
        skips.append(skip)
        x = g.max_pool(f"enc{level}.pool", x)
        x = g.dropout(f"enc{level}.drop", x, dropout_rate)

    x, _ = g.computational_block("bottleneck", x, base_width * 8)

    for level in reversed(range(len(widths))):
        width = widths[level]
        x = g.expansive_unit(f"dec{level}.expand", x, width)
        x = g.concat(f"dec{level}.cat", x, skips[level])
        x, _ = g.computational_block(f"dec{level}", x, width)

    x = g.computational_unit("head.unit1", x, base_width)
    x = g.computational_unit("head.unit2", x, base_width)
    out = g.conv("head", x, 1, kernel=1)
    return g.build(out, base_width, depth=4, dropout_rate=dropout_rate, arch=Architecture.MODEL_A)


def build_model_b(in_ch: int = 6, base_width: int = 32) -> NetworkSpec:
    """U-Net with concatenating downsampling blocks and a dilated bottleneck.
    The decoder only upsamples bilinearly; it has no dropout."""
    g = GraphBuilder(in_ch)
    widths = [base_width, base_width * 2, base_width * 4]

    x, skips = INPUT, []
    for level, width in enumerate(widths):
        x = g.conv_bn_relu(f"enc{level}.c1", x, width)
        x = g.conv_bn_relu(f"enc{level}.c2", x, width)
        g.mark_skip(x)
        skips.append(x)
        x = g.downsample_block(f"enc{level}.down", x)

    x = g.dilated_bottleneck("bottleneck", x, base_width * 8)

    for level in reversed(range(len(widths))):
        width = widths[level]
        x = g.upsample(f"dec{level}.up", x)
        x = g.conv(f"dec{level}.upconv", x, width)
        x = g.concat(f"dec{level}.cat", x, skips[level])
        x = g.conv_bn_relu(f"dec{level}.c1", x, width)
        x = g.conv_bn_relu(f"dec{level}.c2", x, width)

    out = g.conv("head", x, 1, kernel=1)
    return g.build(out, base_width, depth=4, dropout_rate=0.0, arch=Architecture.MODEL_B)
