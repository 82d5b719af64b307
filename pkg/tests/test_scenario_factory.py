import pytest

from core.errors import InputError
from core.scenario_factory import ScenarioFactory
from core.whitney import Window


@pytest.fixture
def factory():
    return ScenarioFactory()


def test_parse_name():
    assert ScenarioFactory.parse_name("four-corners(6)") == ("four_corners", "6")
    assert ScenarioFactory.parse_name(" flat ") == ("flat", None)
    with pytest.raises(InputError):
        ScenarioFactory.parse_name("graph((1))")


def test_builtin_scenarios(factory):
    flat = factory.create_scenario("flat")
    assert flat.mode == "cad"
    assert flat.param_window == (-1.0, 1.0)
    fc = factory.create_scenario("four_corners(3)")
    assert fc.max_depth == 6
    assert fc.mode == "adr"
    assert factory.create_scenario("graph(0.5)").params == {"eta": 0.5}
    assert factory.create_scenario("corner_graph").mode == "ur"
    assert factory.create_scenario("polygon(square)").mode == "adr"
    assert not flat.fixed_window


@pytest.mark.parametrize("name", ["sphere", "graph(0)", "graph(abc)", "polygon(hexagon)", "four_corners(0)"])
def test_bad_scenarios(factory, name):
    with pytest.raises(InputError):
        factory.create_scenario(name)


def test_custom_set_needs_a_window(factory):
    spec = {"kind": "polygon", "vertices": [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]}
    with pytest.raises(InputError):
        factory.create_scenario("custom", set_spec=spec)
    scenario = factory.create_scenario("custom", set_spec=spec, window=Window((-2.0, -2.0), (4.0, 4.0)))
    assert scenario.mode == "cad"
    assert scenario.describe()["set"]["kind"] == "polygon"


def test_window_override(factory):
    window = Window((-1.0, -1.0), (1.0, 1.0))
    scenario = factory.create_scenario("flat", window=window)
    assert scenario.window is window
    assert scenario.fixed_window


def test_listing_covers_every_template(factory):
    listed = " ".join(n for names in factory.list_available_scenarios().values() for n in names)
    for key in factory.scenario_templates:
        assert key in listed
