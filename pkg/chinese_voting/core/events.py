"""
Event system for the Chinese Voting Process library.

Long-running operations (fits, warm-start chains, predictive evaluation)
publish progress through a small synchronous emitter so that callers can
attach logging, progress bars or collectors without the library depending
on any of them.
"""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional
import logging

logger = logging.getLogger(__name__)


class EventType(str, Enum):
    """Event types emitted by the analysis pipeline."""

    # Data events
    INGEST_COMPLETED = "ingest_completed"
    FILTER_APPLIED = "filter_applied"

    # Fitting events
    FIT_STARTED = "fit_started"
    FIT_COMPLETED = "fit_completed"
    TAU_FITTED = "tau_fitted"
    REFIT = "refit"

    # Evaluation events
    EVAL_STEP = "eval_step"

    # Output events
    REPORT_WRITTEN = "report_written"

    # Diagnostics
    WARNING = "warning"


@dataclass
class Event:
    """
    Event data structure.

    Attributes:
        type: The type of event
        community_id: The community the event concerns
        data: Event payload data
        timestamp: When the event was created
    """
    type: EventType
    community_id: str
    data: Dict[str, Any] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=datetime.utcnow)

    def to_dict(self) -> Dict[str, Any]:
        """Convert event to dictionary for serialization."""
        return {
            "type": self.type.value,
            "community_id": self.community_id,
            "data": self.data,
            "timestamp": self.timestamp.isoformat(),
        }


EventHandler = Callable[[Event], None]


class EventEmitter:
    """
    Synchronous event emitter.

    Handlers run in registration order on the emitting thread. A failing
    handler is logged and skipped; it never interrupts the computation that
    emitted the event.

    Example:
        emitter = EventEmitter()

        @emitter.on(EventType.FIT_COMPLETED)
        def report(event: Event):
            print(event.data["final_loglik"])

        emitter.emit(Event(
            type=EventType.FIT_COMPLETED,
            community_id="stats",
            data={"final_loglik": -812.4}
        ))
    """

    def __init__(self):
        self._handlers: Dict[EventType, List[EventHandler]] = {}
        self._community_handlers: Dict[str, List[EventHandler]] = {}
        self._global_handlers: List[EventHandler] = []

    def on(self, event_type: EventType, handler: Optional[EventHandler] = None):
        """
        Register an event handler for a specific event type.

        Can be used as a decorator or called directly:
            @emitter.on(EventType.REFIT)
            def handler(event): ...

        Or:
            emitter.on(EventType.REFIT, handler)
        """
        def decorator(func: EventHandler) -> EventHandler:
            self._handlers.setdefault(event_type, []).append(func)
            logger.debug(f"Registered handler for {event_type.value}")
            return func

        if handler is None:
            return decorator
        return decorator(handler)

    def on_community(self, community_id: str, handler: EventHandler):
        """Register a handler for all events of one community."""
        self._community_handlers.setdefault(community_id, []).append(handler)
        logger.debug(f"Registered community handler for {community_id}")

    def on_all(self, handler: EventHandler):
        """Register a global handler that receives all events."""
        self._global_handlers.append(handler)
        logger.debug("Registered global event handler")

    def emit(self, event: Event):
        """
        Emit an event to all registered handlers.

        Args:
            event: The event to emit
        """
        handlers_to_call: List[EventHandler] = []
        handlers_to_call.extend(self._handlers.get(event.type, []))
        handlers_to_call.extend(self._community_handlers.get(event.community_id, []))
        handlers_to_call.extend(self._global_handlers)

        for handler in handlers_to_call:
            try:
                handler(event)
            except Exception as e:
                logger.error(f"Error in event handler for {event.type.value}: {e}", exc_info=e)

    def emit_to_community(self, community_id: str, event_type: EventType, data: Dict[str, Any]):
        """Convenience method to build and emit an event for one community."""
        self.emit(Event(type=event_type, community_id=community_id, data=data))

    def remove_handler(self, event_type: EventType, handler: EventHandler):
        """Remove a specific event handler."""
        try:
            self._handlers.get(event_type, []).remove(handler)
            logger.debug(f"Removed handler for {event_type.value}")
        except ValueError:
            pass

    def clear_all_handlers(self):
        """Remove all registered handlers."""
        self._handlers.clear()
        self._community_handlers.clear()
        self._global_handlers.clear()
        logger.debug("Cleared all event handlers")
