# Numerical services: grid, assembly, spectrum, energy, solvers, regimes, IO
