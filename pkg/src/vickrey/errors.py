"""Exception hierarchy shared across the package."""


class VickreyError(Exception):
    """Base class for all package errors."""


class EmbeddingError(VickreyError):
    pass


class EmptyFile(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DuplicateWord(EmbeddingError):
    def __init__(self, word, line):
        super().__init__(f"duplicate word {word!r} at line {line}")
        self.word = word
        self.line = line


class MalformedNumber(EmbeddingError):
    def __init__(self, line, detail=""):
        super().__init__(f"malformed number at line {line}" + (f": {detail}" if detail else ""))
        self.line = line


class KTooLarge(VickreyError, ValueError):
    pass


class NotPositiveDefinite(VickreyError, ValueError):
    pass


class VocabularyTooSmall(VickreyError, ValueError):
    pass


class OutOfVocabulary(VickreyError, KeyError):
    def __init__(self, token, position):
        super().__init__(f"out-of-vocabulary token {token!r} at position {position}")
        self.token = token
        self.position = position

    def __str__(self):
        return self.args[0]


class DimensionNotOne(VickreyError, ValueError):
    pass


class EmptyPrior(VickreyError, ValueError):
    pass


class LexiconMissingWord(VickreyError, KeyError):
    def __init__(self, word):
        super().__init__(f"word {word!r} missing from sentiment lexicon")
        self.word = word

    def __str__(self):
        return self.args[0]


class BudgetUnreachable(VickreyError):
    def __init__(self, epsilon, loss, budget):
        super().__init__(
            f"utility loss {loss:.6g} still above budget {budget:.6g} at epsilon={epsilon:.6g}"
        )
        self.epsilon = epsilon
        self.loss = loss
        self.budget = budget


class ConfigError(VickreyError, ValueError):
    pass
