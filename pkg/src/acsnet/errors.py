"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraints."""


class ContractError(ValueError):
    """An operation was called with arguments outside its contract."""


class NumericError(FloatingPointError):
    """A numeric invariant broke (NaN/Inf, zero mass, divergence)."""


class StateError(RuntimeError):
    """A stateful object was driven through an illegal transition."""
