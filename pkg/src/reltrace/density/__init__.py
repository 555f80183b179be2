"""Free transition densities of the relativistic stable process."""

from .exponent import char_exponent, density_at_zero, zero_point_difference
from .expansion import ExpansionTerms, density_diff_expansion, intermediate_count, uniform_convergence_gap
from .hankel import free_density
from .subordination import positive_stable_pdf, subordinated_density
from .tables import (DensityStack, RadialDensityTable, build_density_stack, build_density_table, load_table,
                     save_table)

__all__ = [
    "char_exponent", "density_at_zero", "zero_point_difference", "ExpansionTerms", "density_diff_expansion",
    "intermediate_count", "uniform_convergence_gap", "free_density", "positive_stable_pdf",
    "subordinated_density", "DensityStack", "RadialDensityTable", "build_density_stack", "build_density_table",
    "load_table", "save_table",
]
