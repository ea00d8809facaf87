class RoninError(Exception):
    """Base class of every error raised by the pipeline."""


class ConfigError(RoninError):
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class ManifestError(RoninError):
    pass


class ManifestParseError(ManifestError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class ManifestValidationError(ManifestError):
    def __init__(self, violations):
        self.violations = list(violations)
        summary = '; '.join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            summary += f' (+{more} more)'
        super().__init__(f'manifest invalid: {summary}')


class ExclusionError(RoninError):
    pass


class BackendError(RoninError):
    pass


class BackendUnavailable(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class ResolutionUnsupported(BackendError):
    pass


class EncoderError(BackendError):
    pass


class DegenerateCrop(RoninError):
    def __init__(self, detection_id, box):
        super().__init__(f'degenerate crop for detection {detection_id}: {box}')
        self.detection_id = detection_id
        self.box = box


class EvaluationError(RoninError):
    pass


class LabelError(RoninError, ValueError):
    pass
