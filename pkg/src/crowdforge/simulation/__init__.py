"""Agenda-driven day simulation on the navigation graph."""
from .engine import (GROUPED, IDLE, INTERACTING, WALKING, Agent, ExecutionContext, PersonView, SimConfig,
                     Simulation, Walk, fmt_time, simulate_day)
from .records import BuildingEvent, OccupancyTable, TrajectoryWriter, exits_without_entry

__all__ = ["GROUPED", "IDLE", "INTERACTING", "WALKING", "Agent", "ExecutionContext", "PersonView", "SimConfig",
           "Simulation", "Walk", "fmt_time", "simulate_day", "BuildingEvent", "OccupancyTable", "TrajectoryWriter",
           "exits_without_entry"]
