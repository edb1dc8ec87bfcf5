"""Exception hierarchy shared by the pipeline modules."""


class PrnuError(Exception):
    """Base class for all errors raised by prnugroups."""


class ImageDecodeError(PrnuError):
    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot decode image {self.path}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class ImageTooSmallError(PrnuError, ValueError):
    def __init__(self, height, width, size):
        self.height, self.width, self.size = height, width, size
        super().__init__(
            f"image of {width}x{height} pixels is smaller than required size {size}"
        )


class DimensionMismatchError(PrnuError, ValueError):
    pass


class ConstantInputError(PrnuError, ValueError):
    pass


class ZeroPatternError(ConstantInputError):
    """Noise pattern has no variation (saturated or flat frame)."""


class DuplicateMemberError(PrnuError, ValueError):
    pass


class InsufficientCamerasError(PrnuError, ValueError):
    pass


class InsufficientSamplesError(PrnuError, ValueError):
    def __init__(self, cells):
        self.cells = sorted(cells)
        super().__init__(f"not enough patterns per camera for grid cells {self.cells}")


class EmptyTableError(PrnuError, ValueError):
    pass


class ConfigMismatchError(PrnuError, ValueError):
    pass


class FormatError(PrnuError, ValueError):
    pass
