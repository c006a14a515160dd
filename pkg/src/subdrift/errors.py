"""Exception types shared across the package."""


class SubdriftError(Exception):
    """Base class for all package errors."""


class ContractError(SubdriftError, ValueError):
    """An argument violates an operation's input contract."""


class CapabilityError(SubdriftError):
    """The kernel (or rate family) lacks a capability the operation needs."""


class StateSpaceError(SubdriftError):
    """A sampler produced a state outside the declared state space."""

    def __init__(self, state, space):
        super().__init__(f"sampled state {state!r} lies outside {space}")
        self.state = state
        self.space = space


class DomainError(ContractError):
    """A parameter lies outside the domain where the quantity exists."""


class ScopeError(ContractError):
    """The request is outside the scope of the result being applied."""
