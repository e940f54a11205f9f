class LabError(Exception):
    """Base error. Carries the process exit code the CLI should return."""

    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(LabError, ValueError):
    pass


class ConfigError(LabError):
    pass


class OutputLockedError(ConfigError):
    pass


class DegenerateInputError(DomainError):
    pass


class InsufficientDataError(DomainError):
    pass


class TrainingDivergence(LabError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became NaN at epoch {epoch}")
        self.epoch = epoch


class NoFlipWithinBudget(LabError):
    def __init__(self, budget: float, evaluations: int):
        super().__init__(f"no decision flip within radius {budget:.6g} after {evaluations} evaluations")
        self.budget = budget
        self.evaluations = evaluations


class CertificateError(LabError):
    pass


class NoAscentDirection(LabError):
    pass


def require(condition: bool, detail: str, error=DomainError):
    if not condition:
        raise error(detail)
