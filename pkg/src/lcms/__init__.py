"""Locally conformal multisymplectic field theory toolkit."""

from .symexpr import Expr, parse, var, exp, sin, cos, diff, evaluate, is_zero
from .forms import (ChartSpec, DifferentialForm, VectorField, SectionMap, wedge,
                    exterior_derivative, interior_product, lichnerowicz, pullback,
                    contract_connection)

__version__ = "0.1.0"
