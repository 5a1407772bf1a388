import json
from pathlib import Path

import numpy as np
import pytest

from nearinv.cli import GOLDENS, dump_spec, load_spec, main, parse_spec
from nearinv.errors import SpaceError

SPECS = Path(__file__).resolve().parents[1] / "specs"
VALID = ["eh1", "eh2", "defect_basic", "dirichlet_alpha", "span_z", "defect_failure",
         "full_h2", "full_h2_z2"]


def spec_path(name):
    return str(SPECS / f"{name}.json")


def eh1_obj():
    return json.loads((SPECS / "eh1.json").read_text())


def write(tmp_path, obj, name="spec.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


@pytest.mark.parametrize("name", VALID)
def test_round_trip(name):
    a = load_spec(spec_path(name))
    b = parse_spec(json.loads(json.dumps(dump_spec(a))))
    for x, y in zip(a.space.basis, b.space.basis):
        np.testing.assert_array_equal(x.coeffs, y.coeffs)
    np.testing.assert_array_equal(a.space.gram, b.space.gram)
    assert a.phi.zeros == b.phi.zeros and a.phi.phase == b.phi.phase
    if a.defect is not None:
        np.testing.assert_array_equal(a.defect.basis_matrix, b.defect.basis_matrix)


class TestExitCodes:
    @pytest.mark.parametrize("name,code", [("eh1", 0), ("eh2", 0), ("full_h2", 0),
                                           ("span_z", 1), ("defect_failure", 1),
                                           ("bad_alpha", 2), ("noncontractive", 2)])
    def test_check(self, name, code):
        assert main(["check", spec_path(name)]) == code

    @pytest.mark.parametrize("name,code", [("eh1", 0), ("defect_basic", 0), ("full_h2_z2", 0),
                                           ("dirichlet_alpha", 0), ("span_z", 1),
                                           ("defect_failure", 1), ("noncontractive", 2)])
    def test_factorize(self, name, code):
        assert main(["factorize", spec_path(name)]) == code

    @pytest.mark.parametrize("fixture", sorted(GOLDENS))
    def test_reproduce(self, fixture):
        assert main(["reproduce", fixture]) == 0

    def test_malformed_json(self, tmp_path, capsys):
        assert main(["check", write(tmp_path, "{not json")]) == 2
        assert "invalid JSON" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", str(tmp_path / "absent.json")]) == 2

    def test_missing_field_named(self, tmp_path, capsys):
        obj = eh1_obj()
        del obj["space"]["metric"]
        assert main(["check", write(tmp_path, obj)]) == 2
        assert "space.metric" in capsys.readouterr().err

    def test_bad_phase(self, tmp_path, capsys):
        obj = eh1_obj()
        obj["inner"]["phase"] = 1.5
        assert main(["factorize", write(tmp_path, obj)]) == 2
        assert "inner.phase" in capsys.readouterr().err

    def test_zero_outside_disc(self, tmp_path, capsys):
        obj = eh1_obj()
        obj["inner"]["zeros"] = [0, 1.2]
        assert main(["check", write(tmp_path, obj)]) == 2
        assert "inner.zeros[1]" in capsys.readouterr().err

    def test_bad_complex(self, tmp_path, capsys):
        obj = eh1_obj()
        obj["space"]["basis"][0][0] = "one"
        assert main(["check", write(tmp_path, obj)]) == 2
        assert "space.basis[0]" in capsys.readouterr().err

    def test_unknown_option(self):
        with pytest.raises(SystemExit) as info:
            main(["check", "--nope", spec_path("eh1")])
        assert info.value.code == 2

    def test_unknown_fixture(self):
        with pytest.raises(SystemExit) as info:
            main(["reproduce", "nothing"])
        assert info.value.code == 2


class TestReports:
    def test_check_json(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["check", spec_path("eh1"), "--json", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["schema"] == 1 and rep["passed"]
        assert abs(rep["norm_ratio"] - 4 / 3) < 1e-12

    def test_check_witness(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["check", spec_path("span_z"), "--json", str(out)]) == 1
        rep = json.loads(out.read_text())
        w = np.array([complex(*c) for c in rep["nearly_invariant"]["witness"]])
        np.testing.assert_allclose(np.abs(w), [0, 1], atol=1e-12)
        assert "witness" in capsys.readouterr().out

    def test_factorize_json_stable(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["factorize", spec_path("eh1"), "--json", str(a)])
        main(["factorize", spec_path("eh1"), "--json", str(b)])
        assert a.read_text() == b.read_text()
        rep = json.loads(a.read_text())
        assert rep["schema"] == 1 and rep["passed"]
        el = rep["factorization"]["elements"][0]
        assert abs(el["h_norm_sq"] - 3) < 1e-12 and abs(el["f_norm_sq"] - 8 / 3) < 1e-10
        c0 = el["coeffs_c"][0][0]
        assert isinstance(c0, list) and len(c0) == 2

    def test_defect_branch(self, tmp_path):
        out = tmp_path / "r.json"
        main(["factorize", spec_path("defect_basic"), "--json", str(out)])
        rep = json.loads(out.read_text())["factorization"]
        assert rep["branch"] == "contained" and rep["p"] == 1 and rep["r"] == 0

    def test_contained_report(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["factorize", spec_path("span_z"), "--json", str(out)]) == 1
        assert json.loads(out.read_text())["passed"] is False

    def test_reproduce_json(self, tmp_path):
        out = tmp_path / "r.json"
        main(["reproduce", "eh1", "--json", str(out)])
        rep = json.loads(out.read_text())
        assert rep["schema"] == 1 and rep["passed"]
        assert all(g["ok"] for g in rep["goldens"])


def test_parse_rejects_two_metrics():
    obj = eh1_obj()
    obj["space"]["metric"]["gram"] = [[1]]
    with pytest.raises(SpaceError, match="space.metric"):
        parse_spec(obj)
