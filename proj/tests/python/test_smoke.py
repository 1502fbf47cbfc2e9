import json
import math

import numpy as np
import pytest

import gazefuse


def test_metrics_and_geometry():
    assert gazefuse.eer([0.9, 0.8], [0.1, 0.2]) == 0.0
    assert gazefuse.eer([0.6, 0.4], [0.5, 0.3]) == pytest.approx(50.0)
    r = gazefuse.frr_at_far([0.5] * 10, [0.3] * 1000, 1e-2)
    assert r["frr_percent"] == 0.0 and r["reliable"]
    assert gazefuse.angular_offset(1.0, 0.0, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert gazefuse.angular_offset(2.0, 3.0, 2.0, 3.0) == 0.0
    assert gazefuse.offset_similarity([0] * 6, [1, 0, 0, 0, 0, 0]) == 0.5


def test_sg_and_idt():
    t = np.arange(300) / 1000.0
    v = gazefuse.sg_differentiate(3.0 * t, 1000.0)
    assert np.allclose(v, 3.0, atol=1e-9)
    fix = gazefuse.idt_fixations(np.arange(300.0), np.zeros(300), np.zeros(300))
    assert fix == [(0, 299)]


def test_fusion_helpers():
    assert gazefuse.weighted_fuse(0.8, 0.2, 0.5) == pytest.approx(0.5)
    assert gazefuse.two_score_features(1, 1) == [1, 1, 1, 1, 1, 0, 1, 1]
    assert len(gazefuse.three_score_features(0.1, 0.2, 0.3)) == 13
    with pytest.raises(gazefuse.GazefuseError) as info:
        gazefuse.weighted_fuse(0.5, 0.5, 0.2)
    assert info.value.code == "AlphaOutOfRange"


def test_pipeline_round_trip(tmp_path):
    manifest = gazefuse.synth(tmp_path / "corpus", n_subjects=10, duration_s=15.0)
    out = tmp_path / "out"
    first = gazefuse.run(manifest=manifest, out_dir=out, n_seq=[1, 2], search_candidates=0)
    report = gazefuse.load_report(first["report"])
    assert report["schema"] == "gazefuse.report/1"
    eers = [r["eer_percent"] for r in report["reports"]]
    assert eers and all(0.0 <= e <= 100.0 and not math.isnan(e) for e in eers)
    second = gazefuse.run(manifest=manifest, out_dir=out, n_seq=[1, 2], search_candidates=0)
    assert second["stages_computed"] == 0
    table = gazefuse.render_table(json.dumps(report))
    assert table.startswith("task,n_seq,")
    assert json.loads(gazefuse.default_config())["k"] == 4
