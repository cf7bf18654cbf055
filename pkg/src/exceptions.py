class SedError(Exception):
    """
    Base error for the incremental SED toolkit.

    Every error carries a human readable ``detail`` and the process
    ``exit_code`` the command line reports for it.

    Parameters:
    detail (str): Diagnostic message.
    exit_code (int, optional): Exit status for the CLI. Defaults to the class value.
    """

    exit_code = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(SedError):
    exit_code = 2


class DataError(SedError):
    exit_code = 3


class ShapeError(DataError, ValueError):
    pass


class CheckpointError(DataError):
    pass


class TrainingError(SedError):
    exit_code = 4


class ScenarioError(TrainingError):
    def __init__(self, scenario: str, detail: str):
        super().__init__(f"scenario {scenario}: {detail}")
        self.scenario = scenario


class MatrixError(TrainingError):
    def __init__(self, failures: list[ScenarioError]):
        lines = "; ".join(error.detail for error in failures)
        super().__init__(f"{len(failures)} scenario(s) failed: {lines}")
        self.failures = failures
