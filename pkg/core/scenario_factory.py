import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from core.ambient import (AmbientSet, make_flat_set, make_four_corners, make_graph_set, make_polygon_set,
                          set_from_config)
from core.errors import InputError
from core.whitney import Window

log = logging.getLogger(__name__)


@dataclass
class Scenario:
    """A set together with the windows and defaults an experiment runs on."""

    name: str
    set: AmbientSet
    window: Window
    param_window: Optional[Tuple[float, float]]
    k_min: int
    mode: str = "adr"
    corona_eta: Optional[float] = None
    max_depth: Optional[int] = None
    fixed_window: bool = False
    description: str = ""
    params: Dict[str, Any] = field(default_factory=dict)

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "set": self.set.describe(),
            "window": {"lo": list(self.window.lo), "hi": list(self.window.hi)},
            "param_window": list(self.param_window) if self.param_window else None,
            "k_min": self.k_min,
            "fixed_window": self.fixed_window,
            "mode": self.mode,
            "corona_eta": self.corona_eta,
            "params": self.params,
        }


def _zigzag(eta: float) -> List[Tuple[float, float]]:
    """Lipschitz graph with slopes +-eta on [-1, 1], constant outside."""
    h = 0.5 * eta
    return [(-1.0, 0.0), (-0.5, h), (0.0, 0.0), (0.5, h), (1.0, 0.0)]


def _flat(params: Dict[str, Any]) -> Scenario:
    return Scenario("flat", make_flat_set(), Window((-4.0, -4.0), (4.0, 4.0)), (-1.0, 1.0), 0, mode="cad",
                    description="the real line in the plane")


def _graph(params: Dict[str, Any]) -> Scenario:
    eta = float(params.get("eta", 0.25))
    if not 0 < eta <= 4:
        raise InputError("graph slope must lie in (0, 4]", eta=eta)
    set_ = make_graph_set(_zigzag(eta))
    return Scenario(f"graph({eta:g})", set_, Window((-4.0, -4.0), (4.0, 4.0)), (-1.0, 1.0), 0, mode="cad",
                    description=f"zigzag Lipschitz graph with slopes +-{eta:g}", params={"eta": eta})


def _corner_graph(params: Dict[str, Any]) -> Scenario:
    eta = float(params.get("eta", 0.125))
    set_ = make_graph_set([(0.0, 0.0), (8.0, 8.0)])
    return Scenario("corner_graph", set_, Window((-4.0, -4.0), (4.0, 4.0)), (-1.0, 1.0), 0, mode="ur",
                    corona_eta=eta, description="graph of max(0, x); two corona regimes meet at the corner",
                    params={"eta": eta})


def _polygon(params: Dict[str, Any]) -> Scenario:
    shape = str(params.get("shape", "square"))
    vertices = {
        "square": [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        "triangle": [(0.0, 0.0), (2.0, 0.0), (0.5, 1.5)],
    }.get(shape)
    if vertices is None:
        raise InputError(f"unknown polygon shape '{shape}'", shape=shape)
    return Scenario(f"polygon({shape})", make_polygon_set(vertices), Window((-3.5, -3.5), (4.5, 4.5)), None, 0,
                    description=f"boundary of the {shape}", params={"shape": shape})


def _four_corners(params: Dict[str, Any]) -> Scenario:
    level = int(params.get("level", 4))
    set_ = make_four_corners(level)
    return Scenario(f"four_corners({level})", set_, Window((-3.5, -3.5), (4.5, 4.5)), None, 0,
                    max_depth=2 * level, description=f"level-{level} four-corners Cantor set",
                    params={"level": level})


def _custom(spec: Dict[str, Any], window: Optional[Window]) -> Scenario:
    set_ = set_from_config(spec)
    if window is None:
        raise InputError("a custom set needs a [window] section")
    mode = "cad" if set_.has_sides() else "adr"
    return Scenario(f"custom({set_.kind})", set_, window, None, 0, mode=mode, fixed_window=True,
                    description="set from the config")


class ScenarioFactory:
    """Registry of the built-in experiment scenarios."""

    PARAMETER = {"graph": "eta", "corner_graph": "eta", "polygon": "shape", "four_corners": "level"}

    def __init__(self):
        self.scenario_templates: Dict[str, Callable[[Dict[str, Any]], Scenario]] = {
            "flat": _flat,
            "graph": _graph,
            "corner_graph": _corner_graph,
            "polygon": _polygon,
            "four_corners": _four_corners,
        }

    @staticmethod
    def parse_name(name: str) -> Tuple[str, Optional[str]]:
        """'four-corners(6)' -> ('four_corners', '6')."""
        m = re.fullmatch(r"\s*([A-Za-z_\-]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*", name or "")
        if not m:
            raise InputError(f"cannot parse scenario name '{name}'")
        return m.group(1).replace("-", "_").lower(), m.group(2) or None

    def create_scenario(self, name: str, set_spec: Optional[Dict[str, Any]] = None,
                        window: Optional[Window] = None) -> Scenario:
        if set_spec is not None:
            scenario = _custom(set_spec, window)
        else:
            key, arg = self.parse_name(name)
            if key not in self.scenario_templates:
                raise InputError(f"unknown scenario '{name}'", available=sorted(self.scenario_templates))
            params: Dict[str, Any] = {}
            if arg is not None:
                params[self.PARAMETER.get(key, "value")] = arg
            try:
                scenario = self.scenario_templates[key](params)
            except ValueError as e:
                if isinstance(e, InputError):
                    raise
                raise InputError(f"bad parameter for scenario '{name}': {e}") from None
            if window is not None:
                scenario.window = window
                scenario.fixed_window = True
        log.info("scenario %s: %s", scenario.name, scenario.description)
        return scenario

    def list_available_scenarios(self) -> Dict[str, List[str]]:
        """Built-in scenarios by category."""
        return {
            "Graphs": ["flat", "graph(eta)", "corner_graph"],
            "Closed curves": ["polygon(square)", "polygon(triangle)"],
            "Purely unrectifiable": ["four_corners(L)"],
        }
