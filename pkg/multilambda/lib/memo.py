"""
Memoizers for immutable model objects.
"""

#-------------------------------------------------------------------------------

import functools

__all__ = [
    "memoize_method",
]

#-------------------------------------------------------------------------------

def memoize_method(fn):
    """
    Memoizes an ordinary method on arguments that are hashable.

    The memo dictionary is attached to each instance, so the instance must
    have a `__dict__` and must not change after construction.  The attribute
    name is stored in `__memo_name__` on the method function.

      class Reduced:

          @memoize_method
          def spectrum(self):
              return scipy.linalg.eigh(self.matrix)

    """
    name = "__memo_" + fn.__name__

    @functools.wraps(fn)
    def memoized(self, *args, **kw_args):
        # FIXME: Bind to the signature first, so defaults share a key.
        key = args + tuple(sorted(kw_args.items()))
        memo = self.__dict__.setdefault(name, {})
        try:
            return memo[key]
        except KeyError:
            value = memo[key] = fn(self, *args, **kw_args)
            return value

    memoized.__memo_name__ = name
    return memoized

