import numpy as np
import pytest

from thermreg.controller import STANDARD_FREQ_SET, Adaptive, ContinuousRange, DiscreteSet, Fixed
from thermreg.errors import ConfigError, ScenarioError
from thermreg.harness.scenario import load_scenario, parse_scenario, shipped_scenarios
from thermreg.plant import CoreParams, floorplan_coupling
from thermreg.workload import ActivityTrace, TabulatedTrace


def test_minimal_scenario_defaults():
    sc = parse_scenario("workloads = steady, volatile\nsetpoint = 341\n")
    assert sc.n_cores == 2
    assert all(c.params == CoreParams() for c in sc.cores)
    assert np.array_equal(sc.coupling, np.zeros((2, 2)))
    assert sc.cycle_length == 0.01 and sc.n_cycles == 70
    assert sc.freq_domain == ContinuousRange(1.0, 4.7)
    assert sc.mode == Adaptive() and sc.initial_freq == 1.0 and sc.seed == 0
    assert list(sc.setpoints) == [341.0, 341.0]
    assert sc.dtdp == 4.286 and not sc.centralized and sc.controlled is None


def test_shipped_paper_fig4(fig4_scenario):
    sc = fig4_scenario
    assert sc.n_cores == 4
    assert [c.workload.name for c in sc.cores] == ["steady", "volatile", "fetch_then_compute", "phased"]
    assert list(sc.setpoints) == [340.0] * 4
    assert sc.cycle_length == pytest.approx(0.01)
    assert sc.freq_domain == ContinuousRange(1.0, 4.7)
    assert np.array_equal(sc.coupling, floorplan_coupling())


def test_shipped_list():
    assert {"paper_fig4", "default", "phased"} <= set(shipped_scenarios())


def test_full_schema(tmp_path):
    (tmp_path / "tr.csv").write_text("t,alpha\n0,0.05\n1,0.1\n")
    text = """
    # comment line
    workloads = constant:0.1, file:tr.csv, phased   # trailing comment
    setpoint = 339
    core1.setpoint = 338.5
    core2.b = 4000
    beta = 900
    coupling = 0 1 2; 1 0 3; 2 3 0
    cycle_ms = 5
    cycles = 12
    freq_set = 1, 2, 3
    discrete = true
    mode = fixed:0.05
    controller = centralized
    controlled = 0, 2
    initial_freq = 2.5
    dtdp = 4.1
    seed = 0xff
    """
    sc = parse_scenario(text, base_dir=tmp_path)
    assert isinstance(sc.cores[1].workload, TabulatedTrace)
    assert isinstance(sc.cores[2].workload, ActivityTrace) and sc.cores[2].workload.seed == 255
    assert list(sc.setpoints) == [339.0, 338.5, 339.0]
    assert sc.cores[2].params.b == 4000 and sc.cores[0].params.b == 4286
    assert all(c.params.beta == 900 for c in sc.cores)
    assert sc.coupling[1, 2] == 3.0
    assert sc.cycle_length == pytest.approx(0.005) and sc.n_cycles == 12
    assert sc.freq_domain == DiscreteSet((1.0, 2.0, 3.0))
    assert sc.mode == Fixed(0.05) and sc.centralized
    assert sc.controlled == (0, 2) and sc.is_controlled(2) and not sc.is_controlled(1)
    assert sc.initial_freq == 2.5 and sc.dtdp == 4.1 and sc.seed == 255


def test_discrete_defaults_to_standard_set():
    sc = parse_scenario("workloads = steady\ndiscrete = yes\n")
    assert sc.freq_domain == DiscreteSet(STANDARD_FREQ_SET)


def test_per_core_workloads_without_list():
    sc = parse_scenario("core0.workload = steady\ncore1.workload = constant:0.2@0.5\n")
    assert sc.n_cores == 2 and sc.cores[1].workload.duration == 0.5


@pytest.mark.parametrize(
    "text, line",
    [
        ("workloads = steady\nbogus = 1\n", 2),
        ("workloads = steady, steady\n\ncoupling = 0 1; 1 0; 0 0\n", 3),
        ("workloads = steady\ncoupling = floorplan\n", 2),
        ("workloads = steady, steady\ncoupling = 0 -1; -1 0\n", 2),
        ("workloads = nope\n", 1),
        ("workloads = steady\ncycles = -3\n", 2),
        ("workloads = steady\ncycles = 2.5\n", 2),
        ("workloads = steady\ncycle_ms = 0\n", 2),
        ("workloads = steady\nfreq_range = 4, 1\n", 2),
        ("workloads = steady\nmode = pid\n", 2),
        ("workloads = steady\nseed = -1\n", 2),
        ("workloads = steady\nseed = 18446744073709551616\n", 2),
        ("workloads = steady\ncontrolled = 3\n", 2),
        ("workloads = steady\ncore3.setpoint = 330\n", 2),
        ("workloads = steady\na = 5\n", 2),
        ("workloads = steady\nsetpoint = 340\nsetpoint = 341\n", 3),
        ("workloads = steady\njust text\n", 2),
        ("workloads = steady\ncontroller = hybrid\n", 2),
        ("workloads = steady\ndiscrete = maybe\n", 2),
        ("workloads = constant:1.5\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}: ")


def test_empty_scenario():
    with pytest.raises(ScenarioError):
        parse_scenario("# nothing\n")


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario("no_such_shipped_name")
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.cfg")


def test_load_from_path(tmp_path):
    f = tmp_path / "s.cfg"
    f.write_text("workloads = steady\ncycles = 3\n")
    sc = load_scenario(f)
    assert sc.n_cycles == 3 and sc.name == "s"


def test_with_seed_reseeds_traces(fig4_scenario):
    sc = fig4_scenario.with_seed(99)
    assert sc.seed == 99
    assert all(c.workload.seed == 99 for c in sc.cores)
    assert fig4_scenario.cores[0].workload.seed == 1


def test_scenario_validation(fig4_scenario):
    with pytest.raises(ConfigError):
        fig4_scenario.replace(cycle_length=0.0)
    with pytest.raises(ConfigError):
        fig4_scenario.replace(controlled=(7,))
