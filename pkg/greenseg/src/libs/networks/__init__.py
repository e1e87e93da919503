from . import (architectures, builder, checkpoint, enums, exceptions,
               executor, factories, models, params)
from .architectures import build_baseline, build_model_a, build_model_b
from .builder import GraphBuilder
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .enums import Architecture, OpKind
from .executor import Network
from .factories import NetworkFactory
from .models import NetworkSpec, Node, ParameterReport
from .params import (ParamStore, count_parameters, init_params,
                     parameter_report)

__all__ = [
    architectures, builder, checkpoint, enums, exceptions, executor,
    factories, models, params,
]
