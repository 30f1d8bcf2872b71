"""Configuration, experiment drivers, weak-form residual and CSV reporting."""
