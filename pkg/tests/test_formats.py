import numpy as np
import pytest

from semgeo.concepts import BetaDelta, CiAggregate, CiRecord
from semgeo.errors import InputError
from semgeo.geo import GeoCoordinate
from semgeo.hierarchy import LocationId, build_hierarchy
from semgeo.ingest.formats import (read_aggregates, read_ci_records, read_forest, read_manifest,
                                   read_partitioning, read_probabilities, write_aggregates,
                                   write_beta_delta, write_ci_records, write_forest,
                                   write_partitioning, write_probabilities)
from semgeo.ingest.metadata import LocationRecord, read_metadata, write_metadata
from semgeo.partitioning import construct_multi

L = LocationId.parse


def small_build():
    addrs = ([(L("W1"), L("R10"), L("R100"))] * 3 + [(L("W2"), L("R10"), L("R100"))] * 2
             + [(L("W3"), L("R11"), L("R100"))] * 3)
    rng = np.random.default_rng(0)
    xy = np.column_stack([rng.uniform(40, 41, len(addrs)), rng.uniform(-3, -2, len(addrs))])
    b = build_hierarchy(addrs)
    mp = construct_multi(b.forest, b.remapped, xy, [2, 4, 8])
    return b, mp


def test_forest_round_trip(tmp_path):
    b, _ = small_build()
    write_forest(tmp_path / "f.tsv", b.forest)
    f = read_forest(tmp_path / "f.tsv")
    assert f.nodes == b.forest.nodes and f.parent == b.forest.parent
    assert f.sample_count == b.forest.sample_count
    write_forest(tmp_path / "g.tsv", f)
    assert (tmp_path / "f.tsv").read_bytes() == (tmp_path / "g.tsv").read_bytes()


def test_forest_text(tmp_path):
    b, _ = small_build()
    write_forest(tmp_path / "f.tsv", b.forest)
    lines = (tmp_path / "f.tsv").read_text().splitlines()
    assert lines[0] == "# semgeo-forest v1"
    assert "location\tparent\tsample_count" in lines
    assert "R100\t-\t8" in lines and "W1\tR10\t3" in lines


def test_forest_bad_inputs(tmp_path):
    p = tmp_path / "f.tsv"
    p.write_text("# semgeo-forest v1\nlocation\tparent\tsample_count\nW1\tR9\t1\n")
    with pytest.raises(InputError, match="R9"):
        read_forest(p)
    p.write_text("# semgeo-partitioning v1\n")
    with pytest.raises(InputError, match="not a semgeo-forest"):
        read_forest(p)


def test_partitioning_round_trip(tmp_path):
    _, mp = small_build()
    names = {L("R10"): "Ten\ttown", L("W1"): "First Street"}
    write_partitioning(tmp_path / "p.tsv", mp, names)
    back, got_names = read_partitioning(tmp_path / "p.tsv")
    assert back.taus == mp.taus
    assert back.parent_cell == mp.parent_cell
    for a, b in zip(back.levels, mp.levels):
        assert a.cells == b.cells and a.cell_center == b.cell_center
        assert a.cell_count == b.cell_count and a.n_assigned == b.n_assigned
    assert got_names[L("R10")] == "Ten town"
    write_partitioning(tmp_path / "q.tsv", back, got_names)
    assert (tmp_path / "p.tsv").read_bytes() == (tmp_path / "q.tsv").read_bytes()


def test_probabilities_round_trip(tmp_path):
    _, mp = small_build()
    rng = np.random.default_rng(1)
    rows = []
    for i in range(20):
        logits = [rng.normal(size=len(p)) for p in mp.levels]
        rows.append((f"s{i}", [np.exp(z) / np.exp(z).sum() for z in logits]))
    write_probabilities(tmp_path / "pr.tsv", mp, rows)
    back = list(read_probabilities(tmp_path / "pr.tsv", mp))
    assert [sid for sid, _ in back] == [sid for sid, _ in rows]
    for (_, a), (_, b) in zip(back, rows):
        for x, y in zip(a, b):
            assert x.tobytes() == np.asarray(y, dtype=np.float64).tobytes()


def test_probabilities_one_hot(tmp_path):
    _, mp = small_build()
    one_hot = [np.eye(len(p))[0] for p in mp.levels]
    write_probabilities(tmp_path / "pr.tsv", mp, [("a", one_hot)])
    ((sid, vecs),) = read_probabilities(tmp_path / "pr.tsv", mp)
    assert sid == "a" and all(v.sum() == 1.0 for v in vecs)


def test_probabilities_sum_check(tmp_path):
    _, mp = small_build()
    bad = [np.full(len(p), 1.5 / len(p)) for p in mp.levels]
    write_probabilities(tmp_path / "pr.tsv", mp, [("a", bad)])
    with pytest.raises(InputError, match="sums to 1.5"):
        list(read_probabilities(tmp_path / "pr.tsv", mp))
    ((_, vecs),) = read_probabilities(tmp_path / "pr.tsv", mp, renormalize=True)
    assert all(abs(v.sum() - 1) < 1e-12 for v in vecs)


def test_probabilities_ordering_mismatch(tmp_path):
    _, mp = small_build()
    write_probabilities(tmp_path / "pr.tsv", mp, [])
    text = (tmp_path / "pr.tsv").read_text()
    assert "# level 0 W1,W2,W3" in text
    (tmp_path / "pr.tsv").write_text(text.replace("# level 0 W1,W2,W3", "# level 0 W1,W3,W2"))
    with pytest.raises(InputError, match="position 1: file has W3, partitioning has W2"):
        list(read_probabilities(tmp_path / "pr.tsv", mp))


def test_ci_records_round_trip(tmp_path):
    recs = [CiRecord("img1", 2, 0.1, 0.3, 0.3 / 0.1, 12.5, 0), CiRecord("img1", "sky", 0.25, 0.5, 2.0, 12.5, 3)]
    write_ci_records(tmp_path / "c.tsv", recs)
    assert read_ci_records(tmp_path / "c.tsv") == recs


def test_aggregates_round_trip(tmp_path):
    aggs = [CiAggregate("sky", (0.0, 25.0), 51, 1.1, 2.2), CiAggregate(4, (25.0, 750.0), 10, 0.1, 1 / 3)]
    write_aggregates(tmp_path / "a.tsv", aggs, ["beta=3"])
    assert read_aggregates(tmp_path / "a.tsv") == aggs
    write_beta_delta(tmp_path / "d.tsv", [BetaDelta("sky", (0.0, 25.0), 0.16, 1.0, 0.84)])
    assert "sky\t0.0\t25.0\t0.16" in (tmp_path / "d.tsv").read_text()


def test_manifest(tmp_path):
    (tmp_path / "m.tsv").write_text("sample_id\texplanation\tsegmentation\tgcd_error_km\n"
                                    "a\te/a.pfm\ts/a.pgm\t3.5\n")
    ((sid, e, s, err),) = read_manifest(tmp_path / "m.tsv")
    assert sid == "a" and e == str(tmp_path / "e" / "a.pfm") and err == 3.5
    (tmp_path / "n.tsv").write_text("sample_id\texplanation\n")
    with pytest.raises(InputError):
        read_manifest(tmp_path / "n.tsv")


def test_metadata_round_trip(tmp_path):
    recs = [LocationRecord(L("R112100"), "Long Beach", "boundary", "administrative", 8, True, "Q16739",
                           "en:Long Beach, California", 469450, "city", {"type": "Point", "coordinates": [1, 2]}),
            LocationRecord(L("W13470104"), "Windsor Way", "highway", "service")]
    write_metadata(tmp_path / "m.jsonl", recs)
    back = read_metadata(tmp_path / "m.jsonl")
    assert back == {r.id: r for r in recs}
    first = (tmp_path / "m.jsonl").read_text().splitlines()[0]
    assert first.startswith('{"id": "W13470104", "localname": "Windsor Way", "category": "highway"')


def test_metadata_errors(tmp_path):
    line = '{"id": "R1", "localname": "x"}\n'
    (tmp_path / "d.jsonl").write_text(line * 2)
    with pytest.raises(InputError, match="duplicate"):
        read_metadata(tmp_path / "d.jsonl")
    with pytest.raises(InputError):
        LocationRecord(L("R1"), admin_level=16)
