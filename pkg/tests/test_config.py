import pytest

from dsehs.config import ConfigError, ExperimentSpec, OptimalConfig, load_config
from dsehs.grid import GridLearnerConfig
from dsehs.learners import LearnerConfig
from dsehs.model import ModelParams
from dsehs.quadtree import BoundingBox


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_empty_config_gives_defaults(tmp_path):
    spec = load_config(write(tmp_path, ""))
    assert spec.model == ModelParams()
    assert spec.algorithm == "optimal" and isinstance(spec.algorithm_config, OptimalConfig)
    assert spec.replicas == 10 and spec.stride == 100 and spec.sim.horizon == 50_000


def test_full_config(tmp_path):
    spec = load_config(write(tmp_path, """
model:
  N_b: 16
  N_e: 8
  N_h: 2
  plr: [0.6, 0.2]
  arrival_dist: [0.8, 0.2]
  channel_matrix: [[0.9, 0.1], [0.3, 0.7]]
sim:
  seed: 4
  horizon: 1000
  initial_state: [2, 3, 1]
algorithm: grid
algorithm_config:
  delta: 20
  T_grid: 50
  delta_unit: discounted
  root_bb: [0, 16, 0, 8]
  beta: {kind: harmonic, n0: 500}
replicas: 3
stride: 10
output: out/run.csv
"""))
    assert spec.model.N_b == 16 and spec.model.plr == (0.6, 0.2)
    assert spec.model.channel_matrix[1] == (0.3, 0.7)
    assert spec.sim.initial_state == (2, 3, 1)
    cfg = spec.algorithm_config
    assert isinstance(cfg, GridLearnerConfig)
    assert (cfg.delta, cfg.T_grid, cfg.delta_unit, cfg.beta.n0) == (20.0, 50, "discounted", 500.0)
    assert cfg.root_bb == BoundingBox(0, 16, 0, 8)
    assert spec.label == "Grid-50" and str(spec.output) == "out/run.csv"


def test_channel_stay(tmp_path):
    spec = load_config(write(tmp_path, "model:\n  N_h: 3\n  channel_stay: 0.8\n"))
    assert spec.model.channel_matrix[1] == pytest.approx((0.1, 0.8, 0.1))


@pytest.mark.parametrize("text,needle", [
    ("model:\n  gamma: 1.0\n", "line 2: model.gamma"),
    ("model:\n  N_h: 2\n  plr: [0.1, 0.5]\n", "line 3: model.plr"),
    ("model:\n  harvest_dist: [0.3, 0.6]\n", "model.harvest_dist"),
    ("model:\n  N_b: 4.5\n", "model.N_b: expected an integer"),
    ("model:\n  colour: red\n", "line 2: model.colour: unknown key"),
    ("algorithm: sarsa\n", "line 1: algorithm"),
    ("algorithm: pds\nalgorithm_config:\n  delta: 3\n", "line 3: algorithm_config.delta: unknown key"),
    ("algorithm: ve\nalgorithm_config:\n  T: 0\n", "algorithm_config.T"),
    ("replicas: 0\n", "replicas"),
    ("sim:\n  initial_state: [40, 0, null]\n", "sim.initial_state"),
    ("sim: [1, 2]\n", "sim: expected a mapping"),
    ("model: {N_b: [\n", "cfg.yaml"),
])
def test_rejections(tmp_path, text, needle):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert needle in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_spec_invariants():
    with pytest.raises(ConfigError):
        ExperimentSpec(algorithm="ve", algorithm_config=OptimalConfig())
    with pytest.raises(ConfigError):
        ExperimentSpec(algorithm="grid", algorithm_config=LearnerConfig())
    assert ExperimentSpec(algorithm="ve", algorithm_config=LearnerConfig(T=10)).label == "VE-10"
    assert ExperimentSpec(algorithm="q-learning", algorithm_config=LearnerConfig()).label == "Q-learning"
