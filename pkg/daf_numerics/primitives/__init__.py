from .pipeline_runner import ExperimentConfig, run, list_systems
