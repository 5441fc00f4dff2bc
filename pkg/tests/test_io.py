import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbn import io
from rbn.bayesnet import Dag, Dataset, make_dag, random_net
from rbn.contamination import HUBER, CptShift, NoiseModel, PointMass, ProductNoise, SubtractiveTail
from rbn.engine import EngineConfig, FilterStack, LinearFilter
from rbn.errors import FormatError


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_roundtrips(x):
    assert float(io.fmt_float(x)) == x


def test_fmt_float_specials():
    assert io.fmt_float(1.0) == "1.0"
    assert io.fmt_float(0.1) == "0.10000000000000001"
    assert io.fmt_float(float("nan")) == "NaN"


def test_model_roundtrip_exact(tmp_path):
    net = random_net(make_dag("tree", 7, 2, seed=1), 0.1, seed=2)
    path = tmp_path / "m.json"
    io.save_model(net, path)
    back = io.load_model(path)
    assert back.dag == net.dag
    assert np.array_equal(back.cpt, net.cpt)
    obj = json.loads(path.read_text())
    assert obj["format"] == "bayesnet-v1"
    assert obj["parents"][2] == sorted(p + 1 for p in net.dag.parents[2])


def test_model_file_is_one_based_lsb_first():
    net = random_net(Dag(3, ((), (), (0, 1))), 0.0, seed=0)
    rows = io.model_to_dict(net)["cpt"]
    assert [(r["node"], r["config"]) for r in rows] == [
        (1, ""), (2, ""), (3, "00"), (3, "10"), (3, "01"), (3, "11")]


def test_model_rejects_bad_input():
    good = io.model_to_dict(random_net(Dag.chain(2), seed=0))
    with pytest.raises(FormatError):
        io.model_from_dict({**good, "format": "other"})
    swapped = dict(good, cpt=[good["cpt"][0], good["cpt"][2], good["cpt"][1]])
    with pytest.raises(FormatError):
        io.model_from_dict(swapped)
    with pytest.raises(FormatError):
        io.model_from_dict(dict(good, cpt=good["cpt"][:2]))


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "format": \n}')
    with pytest.raises(FormatError, match="line 3"):
        io.load_model(p)


def test_dataset_roundtrip():
    x = np.array([[0, 1, 1], [1, 0, 0]], np.uint8)
    text = io.dataset_to_text(Dataset(x, np.array([False, True])))
    assert text == "3 2\n011 G\n100 B\n"
    back = io.dataset_from_text(text)
    assert np.array_equal(back.x, x) and list(back.labels) == [False, True]
    plain = io.dataset_from_text(io.dataset_to_text(Dataset(x)))
    assert plain.labels is None


@pytest.mark.parametrize("text,line", [
    ("3\n", 1),
    ("2 2\n01\n0x\n", 3),
    ("2 1\n011\n", 2),
    ("2 1\n01 Q\n", 2),
    ("2 3\n01\n10\n", 3),
])
def test_dataset_errors_carry_line(text, line):
    with pytest.raises(FormatError, match=f"line {line}"):
        io.dataset_from_text(text)


def test_dataset_mixed_labels_rejected():
    with pytest.raises(FormatError):
        io.dataset_from_text("1 2\n0 G\n1\n")


@pytest.mark.parametrize("adv", [
    ProductNoise(np.array([0.1, 0.9])),
    PointMass(np.array([1, 0], np.uint8)),
    CptShift((1, 2), 0.25),
    SubtractiveTail(np.array([0.6, 0.8]), np.array([0.5, 0.5])),
])
def test_adversary_roundtrip(adv):
    back = io.adversary_from_dict(json.loads(io.dumps(io.adversary_to_dict(adv))))
    assert type(back) is type(adv)
    assert io.adversary_to_dict(back) == io.adversary_to_dict(adv)


def test_noise_spec_parsing():
    m = io.noise_from_dict({"kind": HUBER, "eps": 0.1, "adversary": {"type": "point_mass", "x": "101"}})
    assert isinstance(m, NoiseModel) and list(m.adversary.point) == [1, 0, 1]
    single = io.adversary_from_dict({"type": "cpt_shift", "target": 3, "delta": 0.1})
    assert single.targets == (3,)
    with pytest.raises(FormatError):
        io.noise_from_dict({"kind": HUBER, "adversary": {"type": "point_mass", "x": "1"}})
    with pytest.raises(FormatError):
        io.adversary_from_dict({"type": "unknown"})


def test_config_and_stack_roundtrip():
    cfg = io.config_from_dict({"eps": 0.05, "c_spectral": 2.0})
    assert isinstance(cfg, EngineConfig) and cfg.c_spectral == 2.0
    with pytest.raises(FormatError):
        io.config_from_dict({"eps": 0.05, "bogus": 1})
    stack = FilterStack().push(LinearFilter(np.array([0.6, 0.8]), np.array([0.2, 0.3]), 1.5, 0.25))
    back = io.stack_from_list(json.loads(io.dumps(io.stack_to_list(stack))))
    f, g = stack.filters[0], back.filters[0]
    assert np.array_equal(f.v, g.v) and np.array_equal(f.q, g.q) and (f.T, f.delta) == (g.T, g.delta)
