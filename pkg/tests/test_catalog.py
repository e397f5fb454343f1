import pytest
import yaml

from pathgames import catalog, cli
from pathgames.game import GameSpec


def test_catalog_has_entries_with_oracles():
    entries = catalog.listing()
    assert len(entries) >= 5
    for e in entries:
        assert e["oracle"] and e["description"]


@pytest.mark.parametrize("name", sorted(catalog.CATALOG))
def test_entries_build_with_defaults(name):
    made = catalog.get(name).make()
    if catalog.get(name).kind == "game":
        assert isinstance(made["spec"], GameSpec)
        assert made["initial"].grid == made["spec"].grid
    else:
        assert {"generator", "candidate", "grid"} <= set(made)


def test_unknown_entry_and_params():
    with pytest.raises(KeyError, match="known"):
        catalog.get("nope")
    with pytest.raises(KeyError):
        catalog.get("bang-bang").make({"speed": 2})
    with pytest.raises(ValueError):
        catalog.get("driftless-brownian").make({"payoff": "cubic"})


def test_params_override_defaults():
    made = catalog.get("separable-lq").make({"n_steps": 4, "controls": [0.0, 1.0]})
    assert made["spec"].grid.n_steps == 4
    assert made["spec"].u_grid == (0.0, 1.0)


@pytest.mark.parametrize("name", ["bang-bang", "separable-lq", "bilinear-2x2", "driftless-brownian"])
def test_entry_round_trips_through_scenario(name):
    defaults = catalog.get(name).defaults
    doc = {
        "schema": 1, "name": name, "command": "isaacs", "seed": 0,
        "params": {"entry": name, "entry_params": dict(defaults)},
        "tolerances": {"gap": 1e-10},
    }
    sc = cli.load_scenario(yaml.safe_dump(doc))
    assert sc["params"]["entry_params"] == defaults
    spec = catalog.get(name).make(sc["params"]["entry_params"])["spec"]
    assert spec.grid == catalog.get(name).make()["spec"].grid
