class WisemoveError(Exception):
    """Base class for every error raised by the planning stack"""


class LtlError(WisemoveError):
    pass


class UnknownCharacterError(LtlError):
    def __init__(self, char: str, offset: int):
        self.char = char
        self.offset = offset
        super().__init__(f"Unknown character {char!r} at byte offset {offset}")


class LtlSyntaxError(LtlError):
    def __init__(self, message: str, offset: int, expected: frozenset = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at byte offset {offset}{detail}")


class MissingAtomError(LtlError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Valuation has no value for proposition '{name}'")

    def __str__(self):
        return self.args[0]


class ConfigurationError(WisemoveError):
    def __init__(self, errors):
        self.errors = errors
        super().__init__(f"Invalid configuration: {errors}")


class PlacementInfeasibleError(WisemoveError):
    pass


class IncompleteTraceError(WisemoveError):
    pass


class PlannerError(WisemoveError):
    pass


class NoRuleFiresError(PlannerError):
    pass


class EmptyAvailableError(PlannerError):
    pass


class RenderError(WisemoveError):
    pass
