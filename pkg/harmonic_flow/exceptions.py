from typing import Optional, Sequence


EXIT_DOMAIN = 1
EXIT_IO = 2


class HarmonicFlowError(Exception):
    """Base error; `exit_code` is what the CLI returns for it"""

    exit_code = EXIT_DOMAIN

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class NetworkIOError(HarmonicFlowError):
    exit_code = EXIT_IO


class NetworkParseError(HarmonicFlowError):
    pass


class NetworkValidationError(HarmonicFlowError):
    def __init__(self, findings: Sequence):
        self.findings = list(findings)
        lines = "; ".join(str(finding) for finding in self.findings)
        super().__init__(f"Network failed validation: {lines}")


class UnknownPointError(HarmonicFlowError):
    pass


class UnknownPhaseError(HarmonicFlowError):
    pass


class UnknownSourceError(HarmonicFlowError):
    pass


class IndexUndefinedError(HarmonicFlowError):
    pass


class NonConvergenceError(HarmonicFlowError):
    def __init__(self, iterations: int, mismatch: float):
        self.iterations = iterations
        self.mismatch = mismatch
        super().__init__(
            f"Power flow did not converge in {iterations} iterations (last mismatch {mismatch:.3e} pu)"
        )


class SingularBranchError(HarmonicFlowError):
    def __init__(self, branch_id: str, order: Optional[int] = None):
        self.branch_id = branch_id
        self.order = order
        message = f"Branch {branch_id} has a singular series impedance"
        if order is not None:
            message += f" at order {order}"
        super().__init__(message)


class SingularSystemError(HarmonicFlowError):
    def __init__(self, order: int, reason: Optional[str] = None):
        self.order = order
        message = f"Admittance matrix at order {order} is singular"
        if reason:
            message += f" ({reason})"
        super().__init__(message)


class ResidualError(HarmonicFlowError):
    def __init__(self, order: int, residual: float, bound: float):
        self.order = order
        self.residual = residual
        super().__init__(
            f"Order {order} solve residual {residual:.3e} exceeds bound {bound:.3e}"
        )


class StudyError(HarmonicFlowError):
    """Engine failure inside a study, tagged with the cell or order that failed"""

    def __init__(self, context: str, cause: HarmonicFlowError):
        self.context = context
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"{context}: {cause.detail}")
