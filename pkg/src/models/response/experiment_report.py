from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field

REPORT_SCHEMA = 1


class ExperimentReport(BaseModel):
    """
    Versioned JSON report written by every subcommand.
    """
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=REPORT_SCHEMA, alias="schema")
    command: str
    config: Dict[str, Any]
    seed: int
    timestamp: str
    result: Dict[str, Any]
    status: str = "ok"
