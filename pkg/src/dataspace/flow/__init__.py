"""Condition-driven workflows over a project's jobs."""
from .conditions import (
    Condition,
    always,
    doc_eq,
    doc_gte,
    doc_key_exists,
    file_exists,
    never,
    parse_condition,
    register_condition,
    unregister_condition,
)
from .scheduling import (
    SLURM,
    TORQUE,
    Bundle,
    Dialect,
    JobOperation,
    Scheduler,
    SchedulerStatus,
    SimulatedScheduler,
    SlurmTemplate,
    StatusStore,
    TemplateScheduler,
    TorqueTemplate,
    detect_scheduler,
    generate_script,
    make_bundles,
)
from .workflow import (
    OperationDef,
    RunRecord,
    RunReport,
    Workflow,
    eligible,
    format_status_table,
    is_complete,
    load_workflow,
    render_cmd,
)

__all__ = [
    "Bundle",
    "Condition",
    "Dialect",
    "JobOperation",
    "OperationDef",
    "RunRecord",
    "RunReport",
    "SLURM",
    "Scheduler",
    "SchedulerStatus",
    "SimulatedScheduler",
    "SlurmTemplate",
    "StatusStore",
    "TORQUE",
    "TemplateScheduler",
    "TorqueTemplate",
    "Workflow",
    "always",
    "detect_scheduler",
    "doc_eq",
    "doc_gte",
    "doc_key_exists",
    "eligible",
    "file_exists",
    "format_status_table",
    "generate_script",
    "is_complete",
    "load_workflow",
    "make_bundles",
    "never",
    "parse_condition",
    "register_condition",
    "render_cmd",
    "unregister_condition",
]
