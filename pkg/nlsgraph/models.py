from enum import Enum


class TopologyTag(str, Enum):
    TIP = "Tip"
    CYCLE_COVERED = "CycleCovered"
    ONE_HALF_LINE_NO_TIP = "OneHalfLineNoTip"
    OTHER = "Other"

    @property
    def case(self) -> str:
        """Letter of the existence regime, (a) through (d)."""
        return {
            TopologyTag.TIP: "a",
            TopologyTag.CYCLE_COVERED: "b",
            TopologyTag.ONE_HALF_LINE_NO_TIP: "c",
            TopologyTag.OTHER: "d",
        }[self]


class SolverStatus(str, Enum):
    CONVERGED = "Converged"
    UNBOUNDED_BELOW = "UnboundedBelowDetected"
    MAX_ITERS = "MaxIters"
    FAILED = "Failed"  # scan point or start raised; recorded, never fatal


class Command(str, Enum):
    CLASSIFY = "classify"
    SOLVE = "solve"
    SCAN = "scan"
    GN = "gn"
    TRANSFORM = "transform"
    SELFTEST = "selftest"


class TransformName(str, Enum):
    DECREASING = "decreasing"
    SYMMETRIC = "symmetric"
    BRIDGE_DOUBLE = "bridge-double"
    MODIFIED_GN = "modified-gn"
