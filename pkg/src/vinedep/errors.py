"""Exception hierarchy; the CLI maps each class to an exit code."""


class VineDepError(Exception):
    exit_code = 1


class DataError(VineDepError):
    """Bad input data, schema, or an unmet data precondition."""

    exit_code = 3


class NumericError(VineDepError):
    """A numerical routine failed to converge or produced an invalid value."""

    exit_code = 4
