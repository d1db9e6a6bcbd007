"""Shared builders for the test suite."""
import io
import sys
from contextlib import redirect_stderr, redirect_stdout

from fracvolt.asymptotics import ModelSpec
from fracvolt.hermite import HermiteExpansion
from fracvolt.kernels import Car2First, Car2Second, Exponential

HE2 = (0.0, 0.0, 1.0)  # P(x) = x^2 - 1 in the Hermite basis


def fou_model(h=0.6, sigma=1.0, theta=1.0):
    """One-component model: exponential kernel, P = He_2."""
    return ModelSpec(
        kernels=(Exponential(sigma, theta),),
        expansions=(HermiteExpansion(HE2),),
        h=h,
    )


def car2_model(theta0, theta1, h=0.6):
    """Two-component state model (X, Xdot) with shared P = He_2."""
    return ModelSpec(
        kernels=(Car2First(theta0, theta1), Car2Second(theta0, theta1)),
        expansions=(HermiteExpansion(HE2), HermiteExpansion(HE2)),
        h=h,
    )


def run_cli(*argv):
    """Invoke the CLI in process; returns (exit_code, stdout, stderr)."""
    from fracvolt.cli import main

    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        try:
            code = main(list(argv))
        except SystemExit as exc:  # argparse usage errors
            code = exc.code if exc.code is not None else 0
    return code, out.getvalue(), err.getvalue()
