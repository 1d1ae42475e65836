"""Exception types raised across the package."""


class GraphGenerationError(RuntimeError):
    """No feasible graph could be realized from the drawn degree sequence."""


class SingularDesignError(ValueError):
    """Unpenalized design matrix is rank deficient."""

    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"Singular design; collinear columns: {', '.join(columns)}")


class ResourceBudgetError(RuntimeError):
    """Sampled-copy record budget exceeded."""

    def __init__(self, requested: int, budget: int, suggested_m: int):
        self.requested = requested
        self.budget = budget
        self.suggested_m = suggested_m
        super().__init__(
            f"{requested} sampled records exceed the budget of {budget}; "
            f"try m_copies <= {suggested_m}"
        )


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


class EstimatorStepError(RuntimeError):
    """A step of the five-step estimator failed."""

    def __init__(self, step: int, name: str, cause: BaseException):
        self.step = step
        self.name = name
        super().__init__(f"Estimator step {step} ({name}) failed: {cause}")
