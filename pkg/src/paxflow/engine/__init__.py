"""Event-based simulation of the immigration arrival process."""

from .core import ArrivalPlan, run_compiled, run_python
from .fel import CausalityError, EventKind, EventNotice, FutureEventList
from .queue import (InvariantViolation, QueueState, apply_staffing_change,
                    handle_queue_arrival, handle_service_completion)
from .simulate import (PassengerTrace, SimulationConfig, SimulationResult,
                       generate_passenger_arrivals, simulate_day, simulate_queue)
from .staffing import (CongestionPolicy, StaffingCoverageError, StaffingSchedule,
                       congestion_based_staffing)
