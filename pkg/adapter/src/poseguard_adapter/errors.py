class AdapterError(Exception):
    """Unusable source, model, or configuration."""
