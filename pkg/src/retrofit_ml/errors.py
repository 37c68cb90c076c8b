"""Exception types. The CLI maps each to an exit status."""


class RetrofitError(Exception):
    exit_code = 4


class ConfigError(RetrofitError):
    exit_code = 2


class DataError(RetrofitError, ValueError):
    exit_code = 3


class BudgetExhausted(RetrofitError):
    """Raised by a fitness evaluator once its call budget is spent."""
