"""Minimal stand-in for the ``cython`` module so the kernel runs without Cython installed."""


def _identity(f=None, *args, **kwargs):
    if callable(f):
        return f
    return lambda g: g


cfunc = ccall = inline = cclass = _identity


def exceptval(*args, **kwargs):
    return lambda g: g


def cast(tp, value):
    return tp(value)


class _Scalar:
    def __init__(self, conv):
        self._conv = conv

    def __call__(self, value):
        return self._conv(value)

    def __getitem__(self, item):
        return object


int = _Scalar(__builtins__["int"] if isinstance(__builtins__, dict) else __builtins__.int)
double = _Scalar(float)
compiled = False
