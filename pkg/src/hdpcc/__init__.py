"""Three-level hierarchical Dirichlet process model for case-control genotype data."""
from .data import (EnvMatrix, GenotypeTensor, RunConfig, load_config, load_environment,
                   load_genotypes, parse_config)
from .model import BaseMeasure, HyperParams, precision

__version__ = "0.1.0"
