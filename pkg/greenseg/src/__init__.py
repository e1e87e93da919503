from . import exceptions, libs, run_config, utils
