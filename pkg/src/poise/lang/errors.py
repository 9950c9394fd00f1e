class PolicyError(Exception):
    """Base class for policy-language errors."""


class PolicySyntaxError(PolicyError):
    def __init__(self, msg, line=None, col=None):
        self.msg = msg
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{msg}")


class ValidationError(PolicyError):
    def __init__(self, msg, pos=None):
        self.msg = msg
        self.pos = pos
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{msg}")


class CompositionError(PolicyError):
    pass
