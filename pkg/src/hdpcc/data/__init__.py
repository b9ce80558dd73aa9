from .config import RunConfig, dump_config, load_config, parse_config
from .genotypes import (EnvMatrix, GenotypeTensor, load_environment, load_genotypes,
                        write_environment, write_genotypes)
