# -*- coding: utf-8 -*-


class PCNetError(Exception):
    """Root of every error raised by pcnet_registration."""
    pass


class ImageFormatError(PCNetError, ValueError):
    """The file cannot be read, or its mode / bit depth is not supported."""
    pass


class ShapeMismatchError(PCNetError, ValueError):
    pass


class SingularTransformError(PCNetError, ValueError):
    pass


class DivergenceError(PCNetError, RuntimeError):
    """The optimizer left the image (empty overlap) or produced a non-finite objective."""
    pass


class WeightsFormatError(PCNetError, ValueError):
    pass


class ManifestError(PCNetError, ValueError):
    pass


class TuningAbortedError(PCNetError, RuntimeError):
    def __init__(self, message, history=None):
        super(TuningAbortedError, self).__init__(message)
        self.history = list(history or [])
