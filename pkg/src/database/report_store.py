import csv
import io
import json
import math
import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

# Utils
from utils.log_utils import LogUtil
from utils.environment_utils import EnvironmentUtils

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Models
from models.experiment_config import ExperimentConfig
from models.response.experiment_report import ExperimentReport


def to_jsonable(value: Any) -> Any:
    """
    Plain JSON types for pydantic models, numpy arrays and scalars. Non-finite floats
    become the strings "inf", "-inf" and "nan".
    """
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump(by_alias=True))
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class CsvTable(BaseModel):
    header: List[str]
    rows: List[List[Any]]


"""
Storage class for experiment reports
"""
class ReportStore:
    def __init__(self, log_util: LogUtil, environment_utils: EnvironmentUtils, output_dir: Optional[str] = None):

        # Initialize logger
        self.log_util = log_util

        # Initialize environment utils
        self.environment_utils = environment_utils

        # Default output location
        self.output_dir = output_dir or str(self.environment_utils.get_env_variable("SLE_OUTPUT_DIR"))

    def build_report(self, config: ExperimentConfig, result: Dict[str, Any], timestamp: Optional[str] = None) -> ExperimentReport:
        return ExperimentReport(
            command=config.subcommand,
            config=to_jsonable(config),
            seed=config.seed,
            timestamp=timestamp or datetime.now(timezone.utc).isoformat(),
            result=to_jsonable(result),
        )

    def render_json(self, report: ExperimentReport) -> str:
        return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"

    def render_csv(self, table: CsvTable) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([repr(item) if isinstance(item, float) else item for item in to_jsonable(row)])
        return buffer.getvalue()

    def report_stem(self, config: ExperimentConfig) -> str:
        parts = [config.subcommand]
        if config.mode:
            parts.append(config.mode)
        parts.append(f"seed{config.seed}")
        return "-".join(parts)

    def save(
        self,
        config: ExperimentConfig,
        result: Dict[str, Any],
        tables: Optional[Dict[str, CsvTable]] = None,
        output_dir: Optional[str] = None,
    ) -> List[str]:
        """
        Render everything first and then write each file through a temporary name, so a
        failed run leaves no partial artifacts.
        """
        directory = output_dir or config.output_dir or self.output_dir
        stem = self.report_stem(config)
        rendered = {f"{stem}.json": self.render_json(self.build_report(config, result))}
        if config.csv:
            for name, table in (tables or {}).items():
                rendered[f"{stem}-{name}.csv"] = self.render_csv(table)

        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as e:
            self.log_util.error(service_name="ReportStore", message=f"Cannot create output directory {directory}: {e}")
            raise SLEValidationException(f"output directory {directory} is not writable: {e}")

        paths = []
        for name, text in rendered.items():
            path = os.path.join(directory, name)
            temporary = path + ".tmp"
            with open(temporary, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(temporary, path)
            paths.append(path)
        self.log_util.info(service_name="ReportStore", message=f"Wrote {', '.join(paths)}")
        return paths

    @staticmethod
    def table(header: Sequence[str], rows) -> CsvTable:
        return CsvTable(header=list(header), rows=[list(row) for row in rows])
