from .context import configure, setting, SymredError, SymredThread
from .expression import parse, simplify, differentiate, evaluate, equivalent
from .liealg import get_case, normalize, parse_element, flow
from .models import get_spec, order_split, potential_split, residual
from .solutions import (load_catalog, instantiate, verify, verify_all,
                        quadrature_solve, push_forward, ledger)
from .utils import ctx, logger, yaml_load, __version__
