"""Agenda generation from household rule files."""
from .functions import PCG_FUNCTIONS, PcgEnv, WorldView
from .generator import GenerationContext, HouseholdGenerator, generate_all_agendas
from .model import (DAY, DELAYED, GOTO, GROUP, SLOT, STAY, Agenda, AgendaSet, AgendaTask, FloatingTaskEntry)

__all__ = ["PCG_FUNCTIONS", "PcgEnv", "WorldView", "GenerationContext", "HouseholdGenerator",
           "generate_all_agendas", "DAY", "DELAYED", "GOTO", "GROUP", "SLOT", "STAY", "Agenda", "AgendaSet",
           "AgendaTask", "FloatingTaskEntry"]
