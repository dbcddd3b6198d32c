class ServiceError(Exception):
    """Base class for everything this service raises on purpose."""


class ServiceConfigError(ServiceError):
    """Invalid service configuration."""


class TrainingError(ServiceError):
    """Corpus unusable or the fit could not proceed."""
