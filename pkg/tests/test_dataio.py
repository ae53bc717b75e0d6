import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalesim.core import Population, ScaleRecord
from scalesim.dataio import (DB_COLUMNS, RawScaleRow, Rejection, database_path, dedupe,
                             file_sha256, infer_tonic, load_database, normalize, parse_database,
                             read_population, record_to_row, write_database, write_manifest,
                             write_population)
from scalesim.errors import ParseError

from conftest import ET_MAJOR, record

HEADER = ",".join(DB_COLUMNS)


def write_csv(path, rows, header=HEADER):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def raw(values, kind="CentsIntervals", flags=(), source="Theory", sid="x", culture="C",
        excluded=""):
    return RawScaleRow(sid, sid, culture, "R", source, "", kind, tuple(values), frozenset(flags),
                       excluded)


# --- parsing ------------------------------------------------------------------------------------

def test_parse_well_formed(tmp_path):
    p = write_csv(tmp_path / "db.csv", [
        "a,Major,Western,Europe,Theory,ET,CentsIntervals,200;200;100;200;200;200;100,,",
        "b,Pent,Java,Asia,Measured,,CentsNotes,0;240;480;720;960;1200,,",
        "c,JI,Western,Europe,Theory,JI,FrequencyRatios,1;9/8;5/4;4/3;3/2;5/3;15/8;2,,",
    ])
    res = parse_database(p)
    assert len(res.rows) == 3 and res.errors == []
    assert res.rows[2].values[1] == pytest.approx(1.125)


def test_parse_bad_row_reported(tmp_path):
    p = write_csv(tmp_path / "db.csv", [
        "a,Major,W,E,Theory,,CentsIntervals,200;200;100;200;200;200;100,,",
        "b,Bad,W,E,Theory,,CentsIntervals,200;abc;100,,",
        "c,Pent,W,E,Theory,,CentsIntervals,240;240;240;240;240,,",
    ])
    res = parse_database(p)
    assert len(res.rows) == 2 and len(res.errors) == 1
    assert res.errors[0][0] == 3
    with pytest.raises(ParseError):
        parse_database(p, strict=True)


def test_parse_structural_errors(tmp_path):
    with pytest.raises(ParseError):
        parse_database(write_csv(tmp_path / "h.csv", ["a,b"], header="id,name"))
    p = write_csv(tmp_path / "f.csv", [
        "a,M,W,E,Theory,,CentsIntervals,100;200,bogus_flag,",
        "b,M,W,E,Theory,,Hertz,100;200,,",
        "c,M,W,E,Theory,,CentsIntervals,,,",
        "d,M,W,E,Theory",
        "e,M,W,E,Theory,,CentsIntervals,1/0,,",
    ])
    res = parse_database(p)
    assert res.rows == [] and [line for line, _ in res.errors] == [2, 3, 4, 5, 6]


def test_excluded_reason_optional(tmp_path):
    header = ",".join(DB_COLUMNS[:-1])
    p = write_csv(tmp_path / "db.csv", ["a,M,W,E,Theory,,CentsIntervals,300;300;300;300,"],
                  header=header)
    assert parse_database(p).rows[0].excluded_reason == ""


# --- normalisation -----------------------------------------------------------------------------

def test_normalize_ratios_to_cents():
    rec = normalize(raw([1, 9 / 8, 5 / 4, 4 / 3, 3 / 2, 5 / 3, 15 / 8, 2], "FrequencyRatios"))
    want = 1200 * np.log2([1, 9 / 8, 5 / 4, 4 / 3, 3 / 2, 5 / 3, 15 / 8, 2])
    np.testing.assert_allclose(rec.notes, want, atol=1e-9)


def test_normalize_rules():
    assert normalize(raw([400, 400, 400])).reason == "TooFewNotes"
    assert normalize(raw([100] * 12)).reason == "TooManyNotes"
    # notes past the octave are dropped before counting
    rec = normalize(raw([0, 200, 400, 500, 700, 900, 1100, 1200, 1400], "CentsNotes"))
    assert rec.N == 7 and rec.octave == 1200
    rec = normalize(raw([200, 200, 300, 200, 260], flags=["append_octave"]))
    assert rec.adjacent_intervals[-1] == pytest.approx(40.0)
    assert normalize(raw([300] * 4, source="Folklore")).reason == "InvalidSourceKind"
    assert normalize(raw([300] * 4, excluded="typo in source")).reason == "Excluded"
    assert normalize(raw([0, 500, 300, 700, 900, 1200], "CentsNotes")).reason == "InvalidValues"


def test_infer_tonic():
    notes = np.array([0, 150, 350, 550, 700, 900, 1050, 1340])
    out = infer_tonic(notes)
    # 0 -> 1340 misses by 140; 150 -> 1340 spans 1190, within 50
    assert out[0] == 0 and out[-1] == pytest.approx(1190)
    assert infer_tonic(np.array([0, 300, 600])) is None
    rec = normalize(raw(notes, "CentsNotes", flags=["infer_tonic"]))
    assert isinstance(rec, ScaleRecord) and rec.N == 6
    assert normalize(raw([0, 100, 300, 500], "CentsNotes", flags=["infer_tonic"])).reason == "NoTonic"


@settings(max_examples=40)
@given(st.lists(st.floats(20, 400), min_size=4, max_size=9))
def test_normalize_idempotent(iv):
    first = normalize(raw(iv))
    if isinstance(first, Rejection):
        return
    again = normalize(first)
    assert again == first


def test_dedupe():
    a = record("1", ET_MAJOR, culture="W")
    b = record("2", ET_MAJOR, culture="W")
    c = record("3", ET_MAJOR, culture="J")
    d = record("4", [201.5] + ET_MAJOR[1:-1] + [98.5], culture="W")
    assert [r.id for r in dedupe([a, b])] == ["1"]
    assert [r.id for r in dedupe([a, c])] == ["1", "3"]
    assert [r.id for r in dedupe([a, d])] == ["1", "4"]
    assert [r.id for r in dedupe([b, a])] == ["2"]


# --- round trips ---------------------------------------------------------------------------------

def test_database_round_trip(tmp_path, small_db):
    write_database(small_db, tmp_path / "db.csv")
    back = load_database(tmp_path / "db.csv")
    assert back.errors == [] and back.rejections == []
    assert [r.id for r in back.records] == [r.id for r in small_db]
    for a, b in zip(small_db, back.records):
        np.testing.assert_allclose(a.adjacent_intervals, b.adjacent_intervals, atol=5e-4)
    write_database(back.records, tmp_path / "db2.csv")
    assert (tmp_path / "db.csv").read_bytes() == (tmp_path / "db2.csv").read_bytes()


def test_population_round_trip(tmp_path):
    iv = np.array([[200.1234, 999.8766], [600.0, 600.0]])
    pop = Population(iv, {"cost": [0.25, math.pi]})
    write_population(pop, tmp_path / "p.csv")
    back = read_population(tmp_path / "p.csv")
    np.testing.assert_allclose(back.intervals, np.round(iv, 3))
    assert back.costs["cost"].tolist() == [0.25, math.pi]
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(ParseError):
        read_population(tmp_path / "bad.csv")


def test_load_database_counts(tmp_path):
    p = write_csv(tmp_path / "db.csv", [
        "a,M,W,E,Theory,,CentsIntervals,200;200;100;200;200;200;100,,",
        "b,M,W,E,Theory,,CentsIntervals,200;200;100;200;200;200;100,,",
        "c,M,W,E,Theory,,CentsIntervals,600;600,,",
        "d,M,W,E,Theory,,CentsIntervals,x,,",
    ])
    db = load_database(p)
    assert len(db.records) == 1 and db.duplicates == 1
    assert [r.reason for r in db.rejections] == ["TooFewNotes"] and len(db.errors) == 1


def test_database_path(tmp_path, monkeypatch):
    p = write_csv(tmp_path / "db.csv", [])
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SCALESIM_DATABASE", raising=False)
    assert database_path() is None
    assert database_path(p) == p
    monkeypatch.setenv("SCALESIM_DATABASE", str(p))
    assert database_path() == p


def test_manifest(tmp_path):
    inp = tmp_path / "in.txt"
    inp.write_text("hello")
    m = write_manifest(tmp_path / "m.json", "generate", {"N": 7}, 3, "0.1.0", [inp],
                       [tmp_path / "out.csv"])
    on_disk = json.loads((tmp_path / "m.json").read_text())
    assert on_disk == json.loads(json.dumps(m, default=str))
    assert on_disk["inputs"][str(inp)] == file_sha256(inp)
    assert file_sha256(inp) == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"


def test_record_to_row_roundtrip():
    rec = record("z", ET_MAJOR)
    assert normalize(record_to_row(rec)) == rec
