import json

import pytest

from builders import c4c2c4
from propp import cli, gog
from propp.errors import ProppError, SchemaError, ValidationError
from propp.io import fixture_names, fixture_path, graph_from_dict, graph_to_dict, parse_input


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def fixture_doc(name):
    return json.loads(fixture_path(name).read_text())


# --- parsing ------------------------------------------------------------------

def test_c4_fixture_parses_to_the_amalgam():
    g, _ = parse_input(fixture_path("amalg_c4_c2_c4"))
    assert gog.isomorphic(g, c4c2c4()) is not None


@pytest.mark.parametrize("name", fixture_names())
def test_every_fixture_round_trips(name):
    g, _ = parse_input(fixture_path(name))
    once = graph_to_dict(g)
    again = graph_to_dict(graph_from_dict(once))
    assert once == again
    assert gog.isomorphic(graph_from_dict(once), g) is not None


def test_missing_attachment_names_the_edge(tmp_path):
    doc = fixture_doc("amalg_c4_c2_c4")
    del doc["edges"][0]["attach_to"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="edge 'e'.*attach_to"):
        parse_input(path)


def test_non_injective_attachment_is_a_validation_error(tmp_path):
    doc = fixture_doc("amalg_c4_c2_c4")
    doc["edges"][0]["attach_from"] = ["a^4"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError) as info:
        parse_input(path)
    assert type(info.value.cause).__name__ == "NonInjectiveAttachment"


def test_json_syntax_error_reports_the_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "prime": 2,\n  "vertices": \n}')
    with pytest.raises(SchemaError, match="line 4"):
        parse_input(path)


@pytest.mark.parametrize("kwargs", [{"radius": -1}, {"budget": 0}, {"prime": 4}])
def test_run_config_invariants(kwargs):
    with pytest.raises(ProppError):
        cli.RunConfig("validate", [], **kwargs)


# --- exit codes -----------------------------------------------------------------

def test_reduce_on_reduced_input_has_empty_trace(capsys):
    code, out, _ = run_cli(capsys, "reduce", str(fixture_path("amalg_c4_c2_c4")))
    assert code == 0
    assert json.loads(out)["trace"]["steps"] == []


def test_free_split_hnn_fixture(capsys):
    code, out, _ = run_cli(capsys, "free-split", "hnn", str(fixture_path("hnn_free_cyclic")))
    data = json.loads(out)
    assert code == 0
    assert data["status"] == "FreeOfRank" and data["rank"] == 2
    assert data["transcript_verified"]


def test_audit_of_corrupt_claim_exits_one(capsys):
    code, out, _ = run_cli(capsys, "audit", str(fixture_path("audit_corrupt_claim")))
    assert code == 1
    assert "finite-family" in out


def test_free_split_no_split_exits_one(capsys):
    code, out, _ = run_cli(capsys, "free-split", "amalgam", str(fixture_path("amalg_frattini_nosplit")))
    assert code == 1 and json.loads(out)["status"] == "NoSplit"


def test_acyl_exit_codes(capsys):
    assert run_cli(capsys, "acyl", "--k", "2", str(fixture_path("amalg_free_malnormal")))[0] == 0
    assert run_cli(capsys, "acyl", "--k", "1", str(fixture_path("amalg_c4_c2_c4")))[0] == 1


def test_dominates_takes_two_inputs(capsys):
    code, out, _ = run_cli(capsys, "dominates", "--input", str(fixture_path("amalg_c4_c2_c4")),
                           "--input", str(fixture_path("amalg_c4_c2_c4_collapsed")))
    assert code == 0 and json.loads(out)["overall"]["status"] == "ProvenYes"


def test_errors_exit_three(capsys, tmp_path):
    code, _, err = run_cli(capsys, "validate", str(tmp_path / "nowhere.json"))
    assert code == 3 and "error" in err
    code, _, err = run_cli(capsys, "dominates", str(fixture_path("amalg_c4_c2_c4")))
    assert code == 3 and "two --input" in err
    assert run_cli(capsys, "validate", "--prime", "6", str(fixture_path("amalg_c4_c2_c4")))[0] == 3


def test_cylinders_dot_uses_stable_ids(capsys, tmp_path):
    dot = tmp_path / "tc.dot"
    code, _, _ = run_cli(capsys, "cylinders", "--dot", str(dot), str(fixture_path("amalg_d4_s_d4")))
    text = dot.read_text()
    assert code == 0
    assert '"v:u"' in text and '"cyl:0"' in text


def test_ball_dot_and_text_formats(capsys):
    code, out, _ = run_cli(capsys, "ball", "--radius", "1", "--format", "dot", str(fixture_path("amalg_c4_c2_c4")))
    assert code == 0 and out.startswith(("graph", "digraph"))
    code, out, _ = run_cli(capsys, "rank", "--format", "text", str(fixture_path("amalg_c4_c2_c4")))
    assert code == 0 and "rank_mod_p: 2" in out


# --- determinism ----------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["cylinders", str(fixture_path("amalg_d4_s_d4"))],
    ["ball", "--radius", "2", str(fixture_path("hnn_d4_case1"))],
    ["audit", str(fixture_path("amalg_c4_c2_c4"))],
    ["sample", "--seed", "7"],
    ["sample", "--seed", "7", "--family", "free"],
])
def test_output_is_byte_identical_across_runs(capsys, argv):
    first = run_cli(capsys, *argv)
    second = run_cli(capsys, *argv)
    assert first == second
    assert first[0] == 0


def test_sample_output_parses_and_validates(capsys, tmp_path):
    _, out, _ = run_cli(capsys, "sample", "--seed", "3")
    path = tmp_path / "s.json"
    path.write_text(out)
    assert run_cli(capsys, "validate", str(path))[0] == 0
