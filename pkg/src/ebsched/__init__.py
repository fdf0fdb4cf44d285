"""Offline user scheduling and association for energy-harvesting base stations."""

from .common import budget, capacity_profile, pack, schedule_scsb2
from .model import (UNSERVABLE, EnergyProfile, GenerationParams, Instance, RadioModel, UserRequest,
                    generate_instance, make_instance, rate, required_slots, sinr)
from .multi import (AssociationOutcome, allocate_channels, associate, highest_index, lowest_index,
                    schedule_mcmb, schedule_mcsb, schedule_scmb)
from .oracle import (OracleLimitError, OracleLimits, export_ilp, moore_hodgson, solve_exact, solve_milp,
                     validate_assignment)
from .scsb import (PER_PAIR, PER_SLOT, EnergyLedger, Schedule, ScheduleOutcome, is_feasible,
                   schedule_scsb1, to_nonpreemptive, update_reschedule)

__all__ = [
    "UNSERVABLE", "EnergyProfile", "GenerationParams", "Instance", "RadioModel", "UserRequest",
    "generate_instance", "make_instance", "rate", "required_slots", "sinr",
    "budget", "capacity_profile", "pack", "schedule_scsb2",
    "AssociationOutcome", "allocate_channels", "associate", "highest_index", "lowest_index",
    "schedule_mcmb", "schedule_mcsb", "schedule_scmb",
    "OracleLimitError", "OracleLimits", "export_ilp", "moore_hodgson", "solve_exact", "solve_milp",
    "validate_assignment",
    "PER_PAIR", "PER_SLOT", "EnergyLedger", "Schedule", "ScheduleOutcome", "is_feasible",
    "schedule_scsb1", "to_nonpreemptive", "update_reschedule",
]
__version__ = "0.1.0"
