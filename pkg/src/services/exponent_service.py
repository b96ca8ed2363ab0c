"""
Exponent Service
Scaling exponents attached to kappa and the boundary Poisson kernel.
"""
import math
from typing import Dict, List, Optional, Sequence

from utils.log_utils import LogUtil
from exceptions.sle_exception import SLEValidationException
from models.exponent_table import ExponentTable
from models.loewner_data import MobiusMap, is_infinite

EXPONENT_COLUMNS = ("kappa", "gamma", "Q", "b", "b2", "b_rho_0", "b_weight_2", "delta_gamma", "delta_beta_plus_b")


class ExponentService:
    def __init__(self, log_util: LogUtil):
        self.log_util = log_util

    def exponents(self, kappa: float) -> ExponentTable:
        if not 0.0 < kappa < 8.0:
            self.log_util.error(service_name="ExponentService", message=f"kappa={kappa} outside (0, 8)")
            raise SLEValidationException(f"kappa={kappa} must lie in (0, 8)")
        gamma = math.sqrt(kappa)
        return ExponentTable(
            kappa=kappa,
            gamma=gamma,
            Q=2.0 / gamma + gamma / 2.0,
            b=(6.0 - kappa) / (2.0 * kappa),
            b2=8.0 / kappa - 1.0,
        )

    def poisson_kernel(self, x: float, y: float, frame: Optional[MobiusMap] = None) -> float:
        """
        H(x, y) = phi'(x) phi'(y) (phi(x) - phi(y))^{-2}. A point sent to infinity keeps
        only its derivative factor, under the -1/f convention for phi'.
        """
        if x == y:
            raise SLEValidationException("Poisson kernel needs distinct points")
        frame = frame or MobiusMap.identity()
        fx, fy = frame(x), frame(y)
        dx, dy = frame.derivative(x), frame.derivative(y)
        if is_infinite(fx) or is_infinite(fy):
            return dx * dy
        return dx * dy / (fx - fy) ** 2

    def exponent_rows(self, kappas: Sequence[float]) -> List[Dict[str, float]]:
        rows = []
        for kappa in kappas:
            table = self.exponents(kappa)
            beta = table.gamma - 2.0 / table.gamma
            rows.append({
                "kappa": table.kappa,
                "gamma": table.gamma,
                "Q": table.Q,
                "b": table.b,
                "b2": table.b2,
                "b_rho_0": table.b_rho(0.0),
                "b_weight_2": table.b_weight(2.0),
                "delta_gamma": table.delta(table.gamma),
                "delta_beta_plus_b": table.delta(beta) + table.b,
            })
        return rows
