"""Exceptions raised by the lab. Each carries a stable code and a process exit code."""


class LabError(Exception):
    code = "lab-error"
    exit_code = 1

    def to_record(self):
        return {"error": self.code, "message": str(self)}


class GridTooNarrow(LabError):
    code = "grid-too-narrow"
    exit_code = 10


class ZeroWeight(LabError):
    code = "zero-weight"
    exit_code = 11


class ZeroNorm(LabError):
    code = "zero-norm"
    exit_code = 12


class Delocalized(LabError):
    code = "delocalized"
    exit_code = 13


class DimensionMismatch(LabError):
    code = "dimension-mismatch"
    exit_code = 14


class MissingPacket(LabError):
    code = "missing-packet"
    exit_code = 15


class GridMismatch(LabError):
    code = "grid-mismatch"
    exit_code = 16


class RoughLambda(LabError):
    code = "rough-lambda"
    exit_code = 17


class RoughPotential(LabError):
    code = "rough-potential"
    exit_code = 18


class UnstableStep(LabError):
    code = "unstable-step"
    exit_code = 19


class NonzeroVectorPotential(LabError):
    code = "nonzero-vector-potential"
    exit_code = 20


class NonuniformVectorPotential(LabError):
    code = "nonuniform-vector-potential"
    exit_code = 21


class TooRelativistic(LabError):
    code = "too-relativistic"
    exit_code = 22


class PartitionGap(LabError):
    code = "partition-gap"
    exit_code = 23


class ZeroBin(LabError):
    code = "zero-bin"
    exit_code = 24


class ConfigInvalid(LabError):
    code = "config-invalid"
    exit_code = 2

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

    def to_record(self):
        record = super().to_record()
        record["field"] = self.field
        return record
