"""Exception hierarchy shared by all pgfv modules."""


class PGFVError(Exception):
    """Base class for every error raised by the library."""


class MeshQualityError(PGFVError):
    """A mesh has an inverted or degenerate triangle."""


class MeshTopologyError(PGFVError):
    """Edges shared by more than two triangles, inconsistent orientation, etc."""


class MeshParseError(PGFVError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class MeshAdmissibilityError(PGFVError):
    """The two-point distance of an edge is not positive."""

    def __init__(self, edge: int, distance: float, rule: str):
        self.edge = edge
        self.distance = distance
        super().__init__(
            f"edge {edge}: {rule} distance {distance:.3e} is not positive"
        )


class SolverError(PGFVError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class SingularMatrixError(SolverError):
    pass


class IndefiniteMatrixError(SolverError):
    pass


class RankDeficientError(PGFVError):
    def __init__(self, rank: int, expected: int):
        self.rank = rank
        self.expected = expected
        super().__init__(f"numerical rank {rank} < {expected}")


class ConstraintRankError(PGFVError):
    def __init__(self, edge: int, rank: int):
        self.edge = edge
        self.rank = rank
        super().__init__(f"edge {edge}: stencil constraints have rank {rank}")


class AssemblyError(PGFVError):
    pass
