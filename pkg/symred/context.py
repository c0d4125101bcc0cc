from contextlib import contextmanager
import logging
import textwrap
import threading

from .utils import logger, default_seed, CTX_STACK, ctx


DEFAULTS = {
    'seed': None,
    'tolerance': 1e-9,
    'quad_tolerance': 1e-6,
    'samples': 100,
    'xi_pairs': 10,
    'draws': 2,
    'workers': 1,
    'report': None,
    'timestamp': True,
}


class SymredError(Exception):
    pass


class ExprSyntaxError(SymredError):
    def __init__(self, msg, offset=None):
        if offset is not None:
            msg = '%s at offset %s' % (msg, offset)
        super(ExprSyntaxError, self).__init__(msg)
        self.offset = offset


class UnboundError(SymredError):
    pass


class DomainError(SymredError):
    def __init__(self, msg, term=None):
        if term is not None:
            msg = '%s in "%s"' % (msg, term)
        super(DomainError, self).__init__(msg)
        self.term = term


class DerivativeError(SymredError):
    pass


class ArityError(SymredError):
    pass


class ChartError(SymredError):
    pass


class ClosureError(SymredError):
    pass


class ConstraintError(SymredError):
    pass


class NumericsError(SymredError):
    pass


class CatalogError(SymredError):
    pass


def log_residual(label, expr, exception=False):
    if not exception and logger.getEffectiveLevel() > logging.DEBUG:
        return
    indent = "  "
    text = textwrap.fill(
        str(expr), initial_indent=indent, subsequent_indent=indent
    )
    if len(text) > 2000:
        text = text[:2000] + "..."
    args = ("%s:\n%s", label, text)
    if exception:
        logger.error(*args)
    else:
        logger.debug(*args)


class Context:

    def __init__(self, cfg=None):
        cfg = dict(cfg or {})
        self.cfg = cfg
        for key, value in DEFAULTS.items():
            setattr(self, key, cfg.get(key, value))
        if self.seed is None:
            self.seed = default_seed()
        if self.tolerance <= 0 or self.quad_tolerance <= 0:
            raise ValueError('Tolerances must be positive (got %s, %s)' % (
                self.tolerance, self.quad_tolerance))

    def enter(self):
        logger.debug('Enter run context (seed=%s)', self.seed)

    def leave(self, exc=None):
        if exc:
            logger.debug('Leave run context on error: %s', exc)

    def clone(self):
        """
        Return a copy of the context, used to hand over the run
        configuration to worker threads
        """
        return Context(dict(self.cfg, seed=self.seed))


def setting(name, value=None):
    """
    Return value if given, else the active run configuration value,
    else the package default
    """
    if value is not None:
        return value
    active = CTX_STACK.active_context()
    if active is not None:
        return getattr(active, name)
    if name == 'seed':
        return default_seed()
    return DEFAULTS[name]


class SymredThread(threading.Thread):
    def __init__(self, *args, **kwargs):
        if CTX_STACK.active_context() is not None:
            # Capture current context if any
            self.stack = [ctx.clone()]
        else:
            self.stack = []
        super(SymredThread, self).__init__(*args, **kwargs)

    def run(self):
        CTX_STACK.reset(self.stack)
        super(SymredThread, self).run()


@contextmanager
def configure(cfg=None):
    new_ctx = CTX_STACK.push(Context(cfg))
    try:
        yield new_ctx
    except Exception as exc:
        CTX_STACK.pop(exc)
        raise
    else:
        CTX_STACK.pop()
