"""
Small formatting and coercion helpers.
"""

#-------------------------------------------------------------------------------

import numbers

import numpy as np

#-------------------------------------------------------------------------------

def if_none(obj, default):
    """
    Returns `obj`, unless it's `None`, in which case returns `default`.

      >>> if_none(0.5, 1.0)
      0.5
      >>> if_none(None, 1.0)
      1.0

    """
    return default if obj is None else obj


def format_call(__fn, *args, **kw_args):
    """
    Formats a function call, with arguments, as a string.

      >>> format_call("run_hom", theta=0.5)
      'run_hom(theta=0.5)'

    @param __fn
      The function to call, or its name.
    @rtype
       `str`
    """
    try:
        name = __fn.__name__
    except AttributeError:
        name = str(__fn)
    args = [ repr(a) for a in args ]
    args.extend( n + "=" + repr(v) for n, v in kw_args.items() )
    return "{}({})".format(name, ", ".join(args))


def format_ctor(obj, *args, **kw_args):
    return format_call(obj.__class__, *args, **kw_args)


def format_number(value):
    """
    Formats a number for result files: 17 significant digits, so that a
    double round-trips exactly.

      >>> format_number(0.25)
      '0.25'
      >>> format_number(1 / 3)
      '0.33333333333333331'

    Complex values are written as `re+imj`; integers and strings pass through.
    """
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Complex) and not isinstance(value, numbers.Real):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    if isinstance(value, numbers.Real):
        return f"{float(value):.17g}"
    return str(value)


