# Utils
from utils.log_utils import LogUtil

# Exceptions
from exceptions.sle_exception import SLEValidationException

# Services
from services.pattern_service import PatternService

# Database
from database.report_store import ReportStore

# Models
from models.experiment_config import ExperimentConfig

# Commands
from commands.command_router import CommandResult, CommandRouter


def create_lp_command(log_util: LogUtil, pattern_service: PatternService) -> CommandRouter:
    router = CommandRouter(name="lp", help_text="Link pattern combinatorics")

    def require_pattern(config: ExperimentConfig):
        if not config.pattern:
            raise SLEValidationException("this mode needs --pattern")
        return pattern_service.parse_lp(config.pattern)

    @router.mode("enumerate", field="n_links", kind=int)
    def enumerate_patterns(config: ExperimentConfig) -> CommandResult:
        """
        List LP_N
        """
        patterns = pattern_service.lp_enumerate(config.n_links or 1)
        log_util.info(service_name="LpCommand", message=f"LP_{config.n_links} has {len(patterns)} patterns")
        result = {"n_links": config.n_links, "count": len(patterns), "patterns": [pattern_service.format_lp(p) for p in patterns]}
        table = ReportStore.table(["index", "pattern"], enumerate(result["patterns"]))
        return result, {"patterns": table}

    @router.mode("validate", field="pattern")
    def validate_pattern(config: ExperimentConfig) -> CommandResult:
        """
        Check a link pattern
        """
        valid = pattern_service.lp_validate(pattern_service.parse_pairs(config.pattern or ""))
        return {"pattern": config.pattern, "valid": valid}, {}

    @router.mode("validate-clp", field="order")
    def validate_curve_pattern(config: ExperimentConfig) -> CommandResult:
        """
        Check a curve link pattern
        """
        valid = pattern_service.clp_validate([int(v) for v in (config.order or "").split(",") if v.strip()])
        return {"order": config.order, "valid": valid}, {}

    @router.mode("faces", field="pattern")
    def faces(config: ExperimentConfig) -> CommandResult:
        """
        Face structure of the welding picture
        """
        alpha = require_pattern(config)
        structure = pattern_service.lp_faces(alpha)
        rows = [(k, face.marked_points, " ".join(str(i) for i in face.interfaces)) for k, face in enumerate(structure.faces)]
        result = {"pattern": str(alpha), "sizes": list(structure.sizes()), "faces": structure}
        return result, {"faces": ReportStore.table(["face", "marked_points", "interfaces"], rows)}

    @router.mode("rotate", field="pattern")
    def rotate(config: ExperimentConfig) -> CommandResult:
        """
        Rotate by --rotation steps
        """
        alpha = require_pattern(config)
        rotated = pattern_service.lp_rotate(alpha, config.rotation)
        return {"pattern": str(alpha), "rotation": config.rotation, "rotated": str(rotated)}, {}

    @router.mode("split", field="pattern")
    def split(config: ExperimentConfig) -> CommandResult:
        """
        Split along --link (default: the link of point 1)
        """
        alpha = require_pattern(config)
        if config.link:
            link = pattern_service.parse_pairs(config.link)[0]
        else:
            link = (1, alpha.partner(1))
        inner, outer = pattern_service.lp_split(alpha, link)
        result = {
            "pattern": str(alpha),
            "link": list(link),
            "inner": pattern_service.format_lp(inner),
            "outer": pattern_service.format_lp(outer),
        }
        return result, {}

    return router
