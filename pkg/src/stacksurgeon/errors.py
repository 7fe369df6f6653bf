"""Exception hierarchy shared across stacksurgeon modules."""


class StackSurgeonError(Exception):
    """Base class for all errors raised by this package."""


# sample source

class InvalidSession(StackSurgeonError, ValueError):
    pass


class TargetNotFound(StackSurgeonError):
    pass


class PermissionDenied(StackSurgeonError):
    pass


class UnsupportedPlatform(StackSurgeonError):
    pass


class SessionClosed(StackSurgeonError):
    pass


class MalformedReplay(StackSurgeonError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


# symbolizer

class NoSymbols(UserWarning):
    """Emitted (as a warning) when a target carries no usable symbol table."""


# calltree

class EmptyChain(StackSurgeonError, ValueError):
    pass


class ZeroTotal(StackSurgeonError, ZeroDivisionError):
    pass


class SchemaViolation(StackSurgeonError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path or '<top>'}: {reason}")
        self.path = path
        self.reason = reason


# analyzer

class ConfigSyntaxError(StackSurgeonError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingRoot(StackSurgeonError):
    def __init__(self):
        super().__init__("configuration has no 'root' directive")


class UncategorizedFound(StackSurgeonError):
    def __init__(self, names):
        self.names = sorted(set(names))
        super().__init__("uncategorized children: " + ", ".join(self.names))


class DuplicateLabel(StackSurgeonError, ValueError):
    def __init__(self, label: str):
        super().__init__(f"duplicate run label {label!r}")
        self.label = label


# runlayout / report

class DirNotFound(StackSurgeonError, FileNotFoundError):
    pass


class EmptyInput(StackSurgeonError, ValueError):
    pass
