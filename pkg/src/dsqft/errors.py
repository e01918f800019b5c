"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


class PoleError(DomainError):
    """Evaluation requested at a pole."""


class ContractError(ValueError):
    """Inputs violate an operation's contract (wrong kind of test function, bad shapes)."""


class ResidualExceeded(RuntimeError):
    """A numerically constructed solution fails its own defining equation."""


class BudgetExceeded(RuntimeError):
    """Requested resolution is beyond the configured work budget."""


class PreconditionViolation(ValueError):
    """A verification was requested on inputs that do not satisfy its hypothesis."""


class MissingEntry(KeyError):
    """A table lookup required by an expansion is absent."""
