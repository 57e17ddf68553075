"""
Estimator registry for shiftbench

This module provides estimator registration, discovery and name-based
dispatch for the CLI and the benchmark harness.
"""

from typing import Any, Dict, List, Optional, Type

import structlog

from .base_estimator import (
    BaseEstimator,
    BbslEstimator,
    CountEstimator,
    EmEstimator,
    EstimationInputs,
    LeipEstimator,
    RllsEstimator,
    RllsHardEstimator,
)
from .models import EstimateResult


class EstimatorRegistry:
    """
    Central registry for label shift estimators

    Manages estimator registration, discovery, validation, and execution routing.
    """

    def __init__(self) -> None:
        self.logger = structlog.get_logger("EstimatorRegistry")
        self._estimators: Dict[str, BaseEstimator] = {}
        self._categories: Dict[str, List[str]] = {}

    def register_estimator(self, estimator_class: Type[BaseEstimator]) -> None:
        """Instantiate and register an estimator class under its name"""
        estimator = estimator_class()
        name = estimator.name
        category = estimator.category

        if name in self._estimators:
            self.logger.warning(
                "Estimator already registered, overwriting",
                estimator=name,
                category=category,
            )

        self._estimators[name] = estimator
        self._categories.setdefault(category, [])
        if name not in self._categories[category]:
            self._categories[category].append(name)

        self.logger.debug(
            "Estimator registered",
            estimator=name,
            category=category,
            estimator_class=estimator_class.__name__,
        )

    def unregister_estimator(self, name: str) -> bool:
        if name not in self._estimators:
            return False
        del self._estimators[name]
        for names in self._categories.values():
            if name in names:
                names.remove(name)
        return True

    def get_estimator(self, name: str) -> Optional[BaseEstimator]:
        return self._estimators.get(name)

    def is_registered(self, name: str) -> bool:
        return name in self._estimators

    def names(self) -> List[str]:
        return list(self._estimators.keys())

    def list_estimators(self, category: Optional[str] = None) -> List[Dict[str, Any]]:
        """Describe all registered estimators, or those in one category"""
        if category:
            names = self._categories.get(category, [])
        else:
            names = list(self._estimators.keys())
        return [self._estimators[name].describe() for name in names]

    def list_categories(self) -> List[str]:
        return list(self._categories.keys())

    def validate_estimator_exists(self, name: str) -> None:
        """
        Validate that an estimator exists

        Raises:
            ValueError: If the estimator is not registered
        """
        if not self.is_registered(name):
            raise ValueError(
                f"Estimator '{name}' not found. "
                f"Available estimators: {', '.join(self.names())}"
            )

    def estimate(self, name: str, inputs: EstimationInputs) -> EstimateResult:
        """Run a registered estimator by name"""
        self.validate_estimator_exists(name)
        return self._estimators[name].run(inputs)


BUILTIN_ESTIMATORS: List[Type[BaseEstimator]] = [
    CountEstimator,
    EmEstimator,
    BbslEstimator,
    RllsEstimator,
    RllsHardEstimator,
    LeipEstimator,
]


def register_builtin_estimators(registry: EstimatorRegistry) -> None:
    for estimator_class in BUILTIN_ESTIMATORS:
        registry.register_estimator(estimator_class)


# Global estimator registry instance
_registry: Optional[EstimatorRegistry] = None


def get_estimator_registry() -> EstimatorRegistry:
    """Get the global estimator registry, registering the built-ins on first use"""
    global _registry
    if _registry is None:
        _registry = EstimatorRegistry()
        register_builtin_estimators(_registry)
    return _registry
