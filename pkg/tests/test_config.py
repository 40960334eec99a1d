import os

from src.config import get, load_conf


def test_missing_file_gives_defaults(tmp_path):
    conf = load_conf(str(tmp_path / "absent.yaml"))
    assert conf == {}
    assert get(conf, "montecarlo.replicas", 200) == 200


def test_dotted_lookup(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("montecarlo:\n  box: [8, 8]\nrun:\n  seed: 5\n")
    conf = load_conf(str(path))
    assert get(conf, "montecarlo.box", None) == [8, 8]
    assert get(conf, "run.seed", 0) == 5
    assert get(conf, "run.seed.deeper", "x") == "x"
    assert get(conf, "synth.tol", 1e-6) == 1e-6


def test_empty_file(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_conf(str(path)) == {}


def test_repository_config_loads():
    conf = load_conf(os.path.join(os.path.dirname(__file__), "..", "config.yaml"))
    assert get(conf, "output.value_digits", None) == 12
    assert len(get(conf, "synth.penalties", [])) == 8
