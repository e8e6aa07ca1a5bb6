"""Decentralised tracer choreography for outline runtime monitors, a
systematic interleaving tester, and a master-worker benchmark."""
from .protocol import DetachRequest, Label, RoutingPacket, TraceEvent
from .runtime import Pid, Runtime, ThreadedRuntime
from .tracer import start
from .verify import is_sound, permutations, systest

__all__ = ["DetachRequest", "Label", "Pid", "RoutingPacket", "Runtime", "ThreadedRuntime",
           "TraceEvent", "is_sound", "permutations", "start", "systest"]
__version__ = "0.1.0"
