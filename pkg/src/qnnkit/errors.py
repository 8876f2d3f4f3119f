"""Exception types shared across the package."""


class ConstructionError(ValueError):
    """A built-in circuit family was asked for an incompatible (m, L)."""


class CapacityError(RuntimeError):
    """A pruned circuit's local Hilbert space exceeds the hard memory cap."""


class ConditioningError(RuntimeError):
    """A kernel train block is numerically singular (condition number too large)."""

    def __init__(self, cond: float):
        self.cond = cond
        super().__init__(f"kernel train block is ill-conditioned: cond = {cond:.3e}")


class NumericFault(RuntimeError):
    """NaN or inf appeared in the parameters during training."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite parameter values at step {step}")


class FlowStepError(RuntimeError):
    """A gradient-flow integrator step increased the loss beyond tolerance."""

    def __init__(self, step: int, increase: float):
        self.step = step
        self.increase = increase
        super().__init__(
            f"loss increased by {increase:.3e} in flow step {step}; use a smaller step size h"
        )
