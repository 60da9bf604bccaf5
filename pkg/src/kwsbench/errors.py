"""Exception hierarchy shared by every kwsbench module.

Each error carries a short ``category`` used by the CLI to format
``error: <category>: <detail>`` lines.
"""


class KwsError(Exception):
    category = "runtime"


class WavDecodeError(KwsError):
    category = "decode"

    def __init__(self, field, detail):
        self.field = field
        super().__init__(f"unsupported {field}: {detail}")


class ShapeError(KwsError):
    category = "shape"

    def __init__(self, message, layer_index=None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class ArchParseError(KwsError):
    category = "parse"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownArchError(KwsError):
    category = "arch"


class WeightFormatError(KwsError):
    category = "format"


class TraceError(KwsError):
    category = "trace"


class SamplerError(KwsError):
    category = "sampler"

    def __init__(self, message, partial=()):
        self.partial = list(partial)
        super().__init__(f"{message} (partial trace: {len(self.partial)} samples)")


class DegenerateInputError(KwsError):
    category = "stats"


class DatasetError(KwsError):
    category = "dataset"


class TableError(KwsError):
    category = "table"
