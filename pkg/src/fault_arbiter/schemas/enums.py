from enum import Enum


# === Enums ===


class FaultClass(str, Enum):
    """
    Machine states. Members are declared in canonical (alphabetical) order;
    every class-indexed vector in the package follows this order.
    """

    BEARING_DAMAGE = "bearing_damage"
    CAVITATION = "cavitation"
    GEAR_FAULT = "gear_fault"
    IMBALANCE = "imbalance"
    LOOSENESS = "looseness"
    MISALIGNMENT = "misalignment"
    NORMAL = "normal"


CANONICAL_CLASSES: tuple[FaultClass, ...] = tuple(FaultClass)


def class_index(label: FaultClass) -> int:
    """Position of a class in the canonical order."""
    return CANONICAL_CLASSES.index(label)


class SpectrumKind(str, Enum):
    """Spectrum flavours produced by feature extraction."""

    FFT = "fft"
    ORDER = "order"
    ENVELOPE = "envelope"


class Split(str, Enum):
    """Dataset partitions."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class Decision(str, Enum):
    """Outcome branches of the arbitration policy."""

    AGREE = "agree"
    OVERRIDE = "override"
    ABSTAIN = "abstain"


class VerificationStatus(str, Enum):
    """Case verification against ground truth."""

    CORRECT = "correct"
    INCORRECT = "incorrect"
    ABSTAINED = "abstained"


class BackendKind(str, Enum):
    """Arbiter backends."""

    ORACLE = "oracle"
    LLM = "llm"
