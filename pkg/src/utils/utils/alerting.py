"""
Convergence alerting for MCMC runs
Turns ESS and acceptance diagnostics into logged alerts; alerts never raise
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np
from loguru import logger


class AlertSeverity(Enum):
    """Alert severity levels"""
    INFO = "info"
    WARNING = "warning"
    CRITICAL = "critical"


@dataclass
class Alert:
    """Represents one convergence alert"""
    id: str
    severity: AlertSeverity
    message: str
    metric: Optional[str] = None
    value: Optional[float] = None
    threshold: Optional[float] = None
    timestamp: float = field(default_factory=time.time)
    metadata: Dict[str, Any] = field(default_factory=dict)


class ConvergenceAlertManager:
    """
    Checks sampler diagnostics against thresholds
    """

    def __init__(self, ess_floor: float = 200.0, acceptance_band: tuple = (0.1, 0.7)):
        self.alerts: List[Alert] = []
        self.alert_callbacks: List[Callable[[Alert], None]] = []
        self.thresholds: Dict[str, float] = {
            "ess_floor": float(ess_floor),
            "acceptance_low": float(acceptance_band[0]),
            "acceptance_high": float(acceptance_band[1]),
        }

    def register_callback(self, callback: Callable[[Alert], None]):
        """Register a callback for alerts"""
        self.alert_callbacks.append(callback)

    def check_ess(self, ess: Mapping[str, float], label: str = "") -> List[Alert]:
        """Alert on every parameter whose ESS is below the floor"""
        alerts = []
        floor = self.thresholds["ess_floor"]
        for name, value in ess.items():
            if not np.isfinite(value):
                alerts.append(Alert(
                    id=f"{label}ess_nonfinite_{name}",
                    severity=AlertSeverity.CRITICAL,
                    message=f"{label}ESS for {name} is not finite (constant or non-finite trace)",
                    metric=name,
                ))
            elif value < floor:
                alerts.append(Alert(
                    id=f"{label}ess_low_{name}",
                    severity=AlertSeverity.WARNING,
                    message=f"{label}ESS for {name} is {value:.1f}, below floor {floor:.0f}",
                    metric=name,
                    value=float(value),
                    threshold=floor,
                ))
        for alert in alerts:
            self._process_alert(alert)
        return alerts

    def check_acceptance(self, acceptance: Mapping[str, float], label: str = "") -> List[Alert]:
        """Alert on Metropolis blocks whose post-burn-in acceptance rate is outside the band"""
        alerts = []
        low, high = self.thresholds["acceptance_low"], self.thresholds["acceptance_high"]
        for block, rate in acceptance.items():
            if rate < low or rate > high:
                alerts.append(Alert(
                    id=f"{label}acceptance_{block}",
                    severity=AlertSeverity.INFO if rate > high else AlertSeverity.WARNING,
                    message=f"{label}acceptance rate for {block} is {rate:.2f}, outside [{low:.2f}, {high:.2f}]",
                    metric=block,
                    value=float(rate),
                ))
        for alert in alerts:
            self._process_alert(alert)
        return alerts

    def _process_alert(self, alert: Alert):
        """Log an alert and notify callbacks"""
        self.alerts.append(alert)
        if alert.severity is AlertSeverity.INFO:
            logger.info(f"ALERT [{alert.severity.value.upper()}]: {alert.message}")
        else:
            logger.warning(f"ALERT [{alert.severity.value.upper()}]: {alert.message}")

        for callback in self.alert_callbacks:
            try:
                callback(alert)
            except Exception as e:
                logger.error(f"Error in alert callback: {e}")

    def get_alerts_by_severity(self, severity: AlertSeverity) -> List[Alert]:
        """Get alerts by severity"""
        return [alert for alert in self.alerts if alert.severity == severity]
