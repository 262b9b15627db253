"""Hyperbolicity checks for metric spaces and for level-set products of two spaces."""

from .errors import (ConfigError, DiscretizationError, DomainError, HorizonTooShortError, HyprodError,
                     InfeasibleError, NoPathError, TruncatedRayError)
from .spaces import GraphSpace, RegularTree, Segment, UpperHalfPlane, load_space
from .hyperbolicity import (TFunction, fit_t_function, four_point_delta, gromov_product, morse_check,
                            tripod_decomposition)
from .busemann import BusemannField, b_ray_from, busemann_value
from .product import ProductSpec, build_product, load_product_spec
from .suite import SuiteConfig, export_plotdata, load_config, run_suite

__version__ = "0.1.0"
