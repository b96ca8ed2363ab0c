from dotenv import load_dotenv
import os

# Utils
from utils.log_utils import LogUtil

"""
Utility class for environment variables
"""
class EnvironmentUtils:
    def __init__(self, log_util: LogUtil):

        # Load environment variables
        load_dotenv()

        # Initialize logger
        self.log_util = log_util

        # Environment variables
        self.env_variables = {
            "APP_ENV": os.getenv("APP_ENV", "local"),
            "ORG_ID": os.getenv("ORG_ID", "sle-montecarlo"),
            "LOKI_URL": os.getenv("LOKI_URL", ""),
            "LOG_LEVEL": os.getenv("LOG_LEVEL", "INFO"),
            "DEBUG": os.getenv("DEBUG", "false"),
            "SLE_OUTPUT_DIR": os.getenv("SLE_OUTPUT_DIR", "./reports"),
            "SLE_THREADS": int(os.getenv("SLE_THREADS", "0")),
            "SLE_BLOCK_SIZE": int(os.getenv("SLE_BLOCK_SIZE", "512")),
        }

    def get_env_variable(self, variable_name: str) -> str | int:
        if variable_name not in self.env_variables:
            self.log_util.error(service_name="EnvironmentUtils", message=f"Environment variable {variable_name} not found")
            raise ValueError(f"Environment variable {variable_name} not found")
        return self.env_variables[variable_name]

    def get_thread_count(self) -> int:
        threads = int(self.get_env_variable("SLE_THREADS"))
        return threads if threads > 0 else (os.cpu_count() or 1)
