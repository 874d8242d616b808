import math

import numpy as np
import pytest

import gopscore


def one_hot_spelling(inv, symbols, frames=3, dominant=0.9):
    cols = len(inv)
    rows = [[0]]
    for s in symbols:
        rows += [[inv.id_of(s)]] * frames + [[0]]
    out = np.full((len(rows), cols), (1 - dominant) / (cols - 1))
    for t, (c,) in enumerate(rows):
        out[t, c] = dominant
    return np.log(out)


def test_forward_two_frames():
    lp = np.log(np.full((2, 2), 0.5))
    assert gopscore.ctc_forward(lp, [1]) == pytest.approx(math.log(0.75), abs=1e-12)
    assert gopscore.ctc_forward(lp[:1], [1, 1]) == -math.inf


def test_masked_union():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.1, 1.0, size=(5, 4))
    lp = np.log(p / p.sum(axis=1, keepdims=True))
    union = gopscore.masked_ctc_forward(lp, [1, 2], 0, [2, 3])
    parts = [gopscore.ctc_forward(lp, [2, 2]), gopscore.ctc_forward(lp, [3, 2])]
    assert union == pytest.approx(np.logaddexp(*parts), abs=1e-9)


def test_alignment_segments():
    lp = np.log(np.array([[1, 1e-9, 1e-9], [1e-9, 1, 1e-9], [1e-9, 1, 1e-9],
                          [1, 1e-9, 1e-9], [1e-9, 1e-9, 1]]))
    segments, _ = gopscore.viterbi_align(lp, [1, 2])
    assert segments == [(1, 1, 3), (2, 4, 5)]


def test_score_detects_substitution():
    inv = gopscore.Inventory.english()
    lp = one_hot_spelling(inv, ["d", "æ", "t"])
    rows = gopscore.score(lp, ["ð", "æ", "t"], inv, method="pp-af", regime="ups")
    assert rows[0]["score"] < 0 < rows[1]["score"]
    assert rows[0]["best_perturbation"] == "sub:d"

    import json
    map_json = json.dumps(gopscore.default_map(inv))
    pa = gopscore.score(lp, ["ð", "æ", "t"], inv, method="pa-af", regime="rps",
                        map_json=map_json)
    assert pa[0]["score"] < 0


def test_pass_counts():
    inv = gopscore.Inventory(["<blank>"] + [f"p{i}" for i in range(39)])
    seq = [f"p{i}" for i in range(10)]
    assert gopscore.pass_count(seq, inv) == 390


def test_errors_are_typed():
    inv = gopscore.Inventory.english()
    with pytest.raises(gopscore.ValidationError):
        gopscore.score(np.zeros((3, len(inv))), ["ð"], inv, regime="rps")
    with pytest.raises(ValueError):
        inv.id_of("not-a-phoneme")


def test_evaluate_separable():
    gop = [-5.0, -4.0, -3.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    lab = [True, True, True, False, False, False, False, False]
    out = gopscore.evaluate(gop, lab)
    assert out["MCC"] == 1.0
    assert out["AUC"] == 1.0
    assert "PCC" not in out
    out = gopscore.evaluate(gop, lab, human=[0.5, 0.2, 0.4, 1.8, 2.0, 1.9, 1.7, 2.0])
    assert "PCC (low conf)" in out
