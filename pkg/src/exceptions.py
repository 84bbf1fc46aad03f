class StivException(Exception):
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def __str__(self) -> str:
        return f"{type(self).__name__}: {self.detail}"


class ShapeMismatchException(StivException):
    def __init__(self, op: str, *shapes):
        super().__init__(f"{op}: incompatible shapes {', '.join(str(tuple(s)) for s in shapes)}")


class NonFiniteException(StivException):
    exit_code = 3

    def __init__(self, op: str, shape=None):
        where = f" (shape {tuple(shape)})" if shape is not None else ""
        super().__init__(f"non-finite values produced by {op}{where}")


class NonScalarOutputException(StivException):
    def __init__(self, shape):
        super().__init__(f"grad needs a scalar output, got shape {tuple(shape)}")


class RopeTableException(StivException):
    pass


class MaskingException(StivException):
    pass


class ConditionException(StivException):
    pass


class UnknownTokenException(StivException):
    def __init__(self, token: str):
        super().__init__(f"unknown caption token {token!r}")


class GuidanceException(StivException):
    pass


class SurgeryException(StivException):
    pass


class TrainingDivergedException(StivException):
    exit_code = 3

    def __init__(self, step: int, detail: str):
        super().__init__(f"step {step}: {detail}")
        self.step = step


class ClipSpecException(StivException):
    pass


class ConfigException(StivException):
    exit_code = 2


class CheckpointException(StivException):
    pass
