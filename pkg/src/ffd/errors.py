"""Exception hierarchy shared by all ffd modules."""


class FfdError(Exception):
    """Base class for every error raised by this package."""


class ParseError(FfdError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class VocabularyError(FfdError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EntityLookupError(FfdError, LookupError):
    pass


class ConfigError(FfdError, ValueError):
    pass


class DimensionError(FfdError, ValueError):
    pass


class TrainingError(FfdError, RuntimeError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)


class StateError(FfdError, RuntimeError):
    pass


class FeedbackError(FfdError, RuntimeError):
    pass


class ContractError(FfdError, ValueError):
    pass


class ModelFormatError(FfdError, ValueError):
    pass
