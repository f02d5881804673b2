"""Exception types shared by the crowdflow modules."""


class CrowdFlowError(Exception):
    """Base class for all crowdflow errors."""


class ShapeMismatchError(CrowdFlowError):
    """An array does not match the grid layout it is paired with."""


class ConfigurationError(CrowdFlowError):
    """Inconsistent problem setup (boundary, parameters, step sizes)."""


class DomainError(CrowdFlowError):
    """An input value lies outside the admissible range."""


class CFLViolation(CrowdFlowError):
    """Explicit transport step refused because the CFL number is too large."""

    def __init__(self, cfl, limit=0.5):
        super().__init__(f"CFL number {cfl:.6g} exceeds the stability limit {limit}")
        self.cfl = cfl
        self.limit = limit


class MonotonicityError(CrowdFlowError):
    """The upwind step produced a negative density, which a monotone scheme
    must not do under a valid CFL number."""


class SimulationError(CrowdFlowError):
    """A stage of the prediction-correction loop failed; carries the step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


class ScenarioParseError(CrowdFlowError):
    """Scenario file rejected; carries the offending line number."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
