"""Exception types shared across the package."""


class ScenefillError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(ScenefillError):
    """Arrays that must agree in shape do not."""


class ConfigError(ScenefillError):
    """A configuration value is out of its legal range or inconsistent."""


class MaskGenerationError(ScenefillError):
    """Mask synthesis failed to produce an acceptable mask."""


class ScheduleError(ScenefillError):
    """A diffusion step index or schedule value is unusable."""


class MetricError(ScenefillError):
    """A metric cannot be computed on the given inputs."""


class IngestionError(ScenefillError):
    """An image or dataset could not be read."""


class CheckpointError(ScenefillError):
    """A checkpoint file is corrupt or incompatible with the current config."""
