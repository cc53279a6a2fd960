import json
import math

import numpy as np
import pytest

from ferroq.lamb1d import Geometry, MaterialParams
from ferroq.manifest import (ManifestError, ModelConfig, Record, load_manifest, load_model_config, load_record,
                             model_config_from_dict, write_manifest, write_model_config)
from ferroq.network import Metadata, Network
from ferroq.reports import make_report, read_report, to_jsonable, write_csv, write_json
from ferroq.touchstone import save_touchstone


def test_manifest_round_trip(tmp_path):
    net = Network([1e9, 2e9], np.full((2, 2, 2), 0.1 + 0j), meta=Metadata(bias_voltage=1.0))
    save_touchstone(net, tmp_path / "a.s2p")
    recs = [Record(tmp_path / "a.s2p", Metadata(bias_voltage=5.0, sweep_direction="forward"))]
    write_manifest(recs, tmp_path / "m.json")
    back = load_manifest(tmp_path / "m.json")
    assert back == recs
    assert json.loads((tmp_path / "m.json").read_text())["records"][0]["path"] == "a.s2p"
    # manifest metadata wins over file comments
    assert load_record(back[0]).meta.bias_voltage == 5.0


def test_manifest_bare_list_and_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('[{"path": "x.s2p", "temperature": 300}]')
    assert load_manifest(p)[0].meta.temperature == 300
    for bad in ("[]", '{"records": 3}', '[{"bias_voltage": 1}]', '[{"path": "x", "colour": 1}]',
                '{"schema": "other/9", "records": [{"path": "x"}]}', '[{"path": "x", "sweep_direction": "up"}]',
                "{not json"):
        p.write_text(bad)
        with pytest.raises(ManifestError):
            load_manifest(p)


def test_model_config_round_trip(tmp_path):
    cfg = ModelConfig(Geometry.split_device(), MaterialParams(eps3=900, c_eff=1e11, e_eff=8),
                      MaterialParams(eps3=2000, c_eff=1e11, e_eff=8))
    write_model_config(cfg, tmp_path / "m.json")
    assert load_model_config(tmp_path / "m.json") == cfg
    with pytest.raises(ManifestError):
        model_config_from_dict({"geometry": {}})
    with pytest.raises(ManifestError):
        model_config_from_dict({"material": {"eps3": 1, "c_eff": 1, "e_eff": 0, "zeta": 1}})
    with pytest.raises(ManifestError):
        model_config_from_dict({"material": {"eps3": 0.1, "c_eff": 1, "e_eff": 0}})


def test_jsonable_and_nan_as_null(tmp_path):
    rep = make_report("fit", {"band": np.array([1.0, 2.0])}, x=math.nan, y=np.float64(2), z=1 + 2j)
    assert rep["schema"] == "ferroq.fit/1"
    assert rep["x"] is None and rep["z"] == {"re": 1.0, "im": 2.0}
    write_json(tmp_path / "r.json", rep)
    assert read_report(tmp_path / "r.json", "fit")["config"]["band"] == [1.0, 2.0]
    with pytest.raises(ValueError):
        read_report(tmp_path / "r.json", "adl")
    assert to_jsonable({1: (np.int64(3), np.bool_(True))}) == {"1": [3, True]}


def test_csv_union_of_columns(tmp_path):
    write_csv(tmp_path / "t.csv", [{"a": 1}, {"b": None, "a": math.inf}])
    assert (tmp_path / "t.csv").read_text().splitlines() == ["a,b", "1,", ","]
