class SLEException(Exception):
    """
    This is the base exception for all sle-montecarlo exceptions
    """
    def __init__(self, message: str, exit_code: int):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message, self.exit_code)

class SLEValidationException(SLEException):
    """
    This is the exception for invalid input: malformed patterns, parameters out of range, schema violations
    """
    def __init__(self, message: str):
        self.message = message
        self.exit_code = 2
        super().__init__(message=self.message, exit_code=self.exit_code)

class SLENumericalException(SLEException):
    """
    This is the exception for numerical failures that invalidate an estimator
    """
    def __init__(self, message: str, exit_code: int = 3):
        self.message = message
        self.exit_code = exit_code
        super().__init__(message=self.message, exit_code=self.exit_code)

class SLEBudgetException(SLENumericalException):
    """
    This is the exception when an explosion guard or a sampling budget is exhausted
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(message=self.message, exit_code=3)
