"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericalError(ArithmeticError):
    """An iterative or summation routine failed to meet its accuracy target."""


class CriticalPointError(DomainError):
    """The point lies on the critical line, where no EOS is provided."""


class AmbiguityError(DomainError):
    """Two phases coexist and the caller did not say which one to return."""
