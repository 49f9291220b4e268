"""Run orchestration, heat-maps, agenda inspection and the random-walk baseline."""
from .baseline import random_walk_events
from .heatmap import (HeatmapGrid, age_mask, filter_by_age, heatmap_from_records, read_pgm, read_trajectories)
from .inspect import inspect_person
from .pipeline import (RunConfig, SimOutputs, artifact_meta, data_path, make_agendas, make_city, make_population,
                       run_pipeline, run_simulation)

__all__ = ["random_walk_events", "HeatmapGrid", "age_mask", "filter_by_age", "heatmap_from_records", "read_pgm",
           "read_trajectories", "inspect_person", "RunConfig", "SimOutputs", "artifact_meta", "data_path",
           "make_agendas", "make_city", "make_population", "run_pipeline", "run_simulation"]
