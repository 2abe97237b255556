"""Three-party protocol simulator: owner, cloud, auditor."""

from .adversary import TAMPERING, Adversary, Answer, Strategy
from .leakage import SCHEMA, AuditResult, LeakageRecord, leakage_audit
from .messages import Kind, WireMessage
from .roles import Auditor, Cloud, Owner, SearchOutcome
from .session import (
    Add,
    Delete,
    PlainOracle,
    Search,
    SearchRecord,
    SoundnessReport,
    Transcript,
    WorkloadConfig,
    random_db,
    random_script,
    run_session,
    soundness_suite,
)
from .transport import InProcessTransport, SocketTransport

__all__ = [
    "TAMPERING",
    "SCHEMA",
    "Add",
    "Adversary",
    "Answer",
    "AuditResult",
    "Auditor",
    "Cloud",
    "Delete",
    "InProcessTransport",
    "Kind",
    "LeakageRecord",
    "Owner",
    "PlainOracle",
    "Search",
    "SearchOutcome",
    "SearchRecord",
    "SocketTransport",
    "SoundnessReport",
    "Strategy",
    "Transcript",
    "WireMessage",
    "WorkloadConfig",
    "leakage_audit",
    "random_db",
    "random_script",
    "run_session",
    "soundness_suite",
]
