"""Exception hierarchy shared by every stage of the flow."""


class FabricError(Exception):
    """Base class for all errors raised by fpga130."""


class ParseError(FabricError):
    """Malformed input text. Carries the 1-based line and column."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            if source:
                where = f"{source}: {where}"
            where += ": "
        super().__init__(where + message)


class NetlistError(FabricError):
    """Structurally invalid netlist or packing."""


class PlacementError(FabricError):
    pass


class RouteError(FabricError):
    """Illegal routing: adjacency, track range, exclusivity or missing sinks."""


class ArchError(FabricError):
    pass


class BitstreamError(FabricError):
    pass


class ContentionError(FabricError):
    """Two enabled drivers on one electrical net or input pin."""


class CombinationalLoopError(FabricError):
    pass


class BusError(FabricError):
    pass
