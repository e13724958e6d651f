import pytest

from svrg import errors


@pytest.mark.parametrize(
    "error,code",
    [
        (errors.DomainError("x"), 2),
        (errors.ParseError("x", "prices.csv", 3), 2),
        (errors.ConfigError("x", ["foo"]), 2),
        (errors.ConvergenceError("x", 0.1, 0.2, 10), 3),
        (errors.TruncationError("x", 1e-9), 3),
        (errors.Closed("x"), 1),
        (RuntimeError("x"), 1),
    ],
)
def test_exit_code(error, code):
    assert errors.exit_code(error) == code


def test_domain_error_is_value_error():
    with pytest.raises(ValueError):
        raise errors.DomainError("bad")


def test_parse_error_location():
    error = errors.ParseError("malformed number", "prices.csv", 7)
    assert str(error) == "prices.csv:7: malformed number"
    assert error.path == "prices.csv"
    assert error.line == 7


def test_parse_error_without_location():
    assert str(errors.ParseError("empty")) == "empty"


def test_config_error_keeps_unknown_keys():
    error = errors.ConfigError("unknown", ["b", "a"])
    assert error.unknown == ("b", "a")


def test_convergence_error_keeps_brackets():
    error = errors.ConvergenceError("stuck", 0.25, 0.5, 100)
    assert (error.lower, error.upper, error.terms) == (0.25, 0.5, 100)
    assert isinstance(error, errors.NumericalError)
