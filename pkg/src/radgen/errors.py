"""Exception types shared across the pipeline."""


class CorpusError(ValueError):
    """A corpus file could not be parsed or violates corpus invariants.

    Carries the 1-based line number and the offending path when known so CLI
    messages can point at the exact input line.
    """

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class RetryableServiceError(RuntimeError):
    """A remote service kept failing transiently (timeouts, refused
    connections, 5xx) after the retry budget was spent."""


class ProtocolError(RuntimeError):
    """A remote service answered, but with something outside the wire
    contract (4xx, unparseable body, missing fields). Never retried."""


class JoinError(ValueError):
    """Generated and reference studies could not be joined on id."""

    def __init__(self, missing_ids: list[str]):
        self.missing_ids = list(missing_ids)
        shown = ", ".join(self.missing_ids[:20])
        more = "" if len(self.missing_ids) <= 20 else f" (+{len(self.missing_ids) - 20} more)"
        super().__init__(f"ids missing from reference corpus: {shown}{more}")
