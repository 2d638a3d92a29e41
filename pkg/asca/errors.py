class AscaError(Exception):
    """Base exception for everything raised by this package."""

    exit_code = 1


class DataError(AscaError):
    """The data (records, tables, matrices) cannot be processed."""

    exit_code = 1


class ConfigError(AscaError):
    """The pipeline configuration is invalid."""

    exit_code = 2


# tensor

class InputFormatError(DataError):
    pass


class DuplicateCell(DataError):
    pass


class UnmappableTimestamp(DataError):
    pass


class UnknownSeries(DataError):
    pass


class UnknownMode(DataError):
    pass


class EvolutionModeInColumns(DataError):
    pass


class EmptyColumnModes(DataError):
    pass


class InvalidModeSpec(DataError):
    pass


class BlockTooLarge(DataError):
    pass


class IndivisibleBlock(DataError):
    pass


# design

class DegenerateFactor(DataError):
    pass


class LevelOutOfRange(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NotProperlyNested(DataError):
    pass


class InteractionWithNestedPair(DataError):
    pass


class DuplicateFactorName(DataError):
    pass


class UnknownTerm(DataError):
    pass


# factorization / inference / sca

class NonFiniteInput(DataError):
    pass


class KZero(DataError):
    pass


class SaturatedModel(DataError):
    pass


class RTooLarge(DataError):
    pass


class ComponentOutOfRange(DataError):
    pass


# preprocess

class AllRowsDropped(DataError):
    pass


class EmptyColumn(DataError):
    pass


# diagnostics

class ZeroSingularValue(DataError):
    pass


class EmptyInput(DataError):
    pass


class ConstantSeries(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class EmptyLevel(DataError):
    pass


class OutputConflict(ConfigError):
    """The output path holds something a run must not replace."""


class ConfigValidationError(ConfigError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__('\n'.join(self.violations))


class RankDeficientWarning(UserWarning):
    pass


class ZeroResidualVarianceWarning(UserWarning):
    pass


class ZeroVarianceWarning(UserWarning):
    pass


class ZeroMatrixWarning(UserWarning):
    pass
