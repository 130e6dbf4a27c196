from pathlib import Path

import pytest

from entropic_dynamics import potentials as P
from entropic_dynamics import states as S
from entropic_dynamics.config import load_scenario, parse_grid, parse_potential, parse_scenario
from entropic_dynamics.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """[scenario]
particles = 1
masses = 1.0
dt = 0.001
grid = -10:10:128
potential = harmonic{omega=2}
initial = coherent{omega=2, shift=0.5}
"""


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    sc = load_scenario(path).scenario
    assert sc.name == path.stem
    sc.require_grid()


def test_fields_are_parsed():
    sc = parse_scenario(BASE).scenario
    assert sc.potential == P.Harmonic(2.0)
    assert sc.initial == S.CoherentState(2.0, (0.5,))
    assert sc.grid.points == (128,) and sc.dt_field == 0.001


def test_sum_of_builtins():
    pot = parse_potential("harmonic{omega=1} + driven{field=0.5, freq=1.3}")
    assert isinstance(pot, P.SumPotential) and len(pot.terms) == 2


def test_vector_values_and_grid_broadcast():
    text = BASE.replace("particles = 1", "particles = 1\nspatial_dim = 2").replace(
        "coherent{omega=2, shift=0.5}", "gaussian{center=(0, 1), sigma=1}")
    sc = parse_scenario(text).scenario
    assert sc.grid.ndim == 2 and sc.initial.center == (0.0, 1.0)
    assert parse_grid("-1:1:16 0:2:32").points == (16, 32)


def test_overrides_win():
    sc = parse_scenario(BASE, overrides={"seed": 9, "walkers": 50, "dt_field": 5e-4, "grid": "-5:5:64"}).scenario
    assert (sc.seed, sc.walkers, sc.dt_field, sc.grid.points) == (9, 50, 5e-4, (64,))


def test_digest_is_of_the_text():
    a, b = parse_scenario(BASE), parse_scenario(BASE + "seed = 1\n")
    assert a.digest != b.digest and len(a.digest) == 64


@pytest.mark.parametrize("line_text, expected_line, fragment", [
    ("masses = -1", 3, "masses"),
    ("colour = blue", 8, "unknown key"),
    ("grid = -10:10", 5, "lower:upper:points"),
    ("potential = magnetic{}", 6, "magnetic"),
    ("potential = harmonic{omega=1, spin=2}", 6, "spin"),
    ("dt = fast", 4, "dt"),
])
def test_errors_name_the_line(line_text, expected_line, fragment):
    key = line_text.split("=")[0].strip()
    lines = BASE.splitlines()
    idx = next((i for i, l in enumerate(lines) if l.startswith(key)), None)
    if idx is None:
        lines.append(line_text)
    else:
        lines[idx] = line_text
    with pytest.raises(ConfigError) as info:
        parse_scenario("\n".join(lines) + "\n", "bad.cfg")
    assert info.value.line == expected_line
    assert fragment in str(info.value)
    assert "bad.cfg" in str(info.value)


def test_missing_section_and_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario("dt = 1\n")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.cfg")
    with pytest.raises(ConfigError):
        parse_scenario(BASE + "[extra]\n")
