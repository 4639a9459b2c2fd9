from _kktrace import (
    KktraceError,
    ModelSpec,
    casimir_eigenvalue,
    character,
    energy_surface_volume,
    find_periodic_orbits,
    flat_spectrum,
    generic_spectrum_1d,
    hamiltonian,
    integrate,
    null_defect,
    run_scenario,
    weyl_dimension,
)

__all__ = [
    "KktraceError",
    "ModelSpec",
    "casimir_eigenvalue",
    "character",
    "energy_surface_volume",
    "find_periodic_orbits",
    "flat_spectrum",
    "generic_spectrum_1d",
    "hamiltonian",
    "integrate",
    "null_defect",
    "run_scenario",
    "weyl_dimension",
]
