from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest

from stemsim.corpus import load_manifest, load_track
from stemsim.encoder import init_params
from stemsim.errors import ErrorCode, StemSimError
from stemsim.evaluation import (
    DistanceMatrix,
    EmbeddingIndex,
    average_matrices,
    build_listening_sets,
    centroid,
    correlation_table,
    cross_role_tables,
    distance_matrix,
    embed_corpus,
    evaluate_role,
    export_snippets,
    index_distance_matrix,
    knn_accuracy,
    knn_predict,
    knn_predictions,
    pearson_upper,
    query_similar,
    read_embeddings_bin,
    read_embeddings_csv,
    read_listening_sets,
    read_matrix_csv,
    snippet_path,
    spearman_avg,
    trial_consistency,
    write_embeddings_bin,
    write_embeddings_csv,
    write_listening_sets,
    write_matrix_csv,
    write_pgm,
)
from stemsim.features import MelSpectrogram
from stemsim.trainer import TrainedModel


def _random_index(rng, n_tracks, per_track, dim=16, instrument="drums"):
    keys = [(f"T{t:02d}", s) for t in range(n_tracks) for s in range(per_track)]
    return EmbeddingIndex(instrument, 0, keys, rng.standard_normal((len(keys), dim)))


def _angles_index(entries):
    """entries: (track_id, segment_index, degrees) on the unit circle."""
    keys = [(t, s) for t, s, _ in entries]
    rad = np.deg2rad([a for _, _, a in entries])
    return EmbeddingIndex("drums", 0, keys, np.stack([np.cos(rad), np.sin(rad)], axis=1))


def _random_matrix(rng, n, ids=None, role="drums", values=None):
    a = values if values is not None else rng.random((n, n))
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 0.0)
    return DistanceMatrix(ids or [f"T{i:02d}" for i in range(n)], a, role=role)


def _matrix_from_pairs(ids, pairs, role=""):
    n = len(ids)
    values = np.zeros((n, n))
    for (a, b), d in pairs.items():
        i, j = ids.index(a), ids.index(b)
        values[i, j] = values[j, i] = d
    return DistanceMatrix(list(ids), values, role=role)


# --- kNN -----------------------------------------------------------------------


def _oracle_predict(index, row, k):
    e = index.embeddings
    q = e[row]
    scored = []
    for i, (track, seg) in enumerate(index.keys):
        if i == row:
            continue
        cos = sum(x * y for x, y in zip(q, e[i])) / (math.sqrt(sum(x * x for x in q)) * math.sqrt(sum(y * y for y in e[i])))
        scored.append((1.0 - cos, track, seg))
    scored.sort()
    votes, sums = Counter(), Counter()
    for d, track, _ in scored[:k]:
        votes[track] += 1
        sums[track] += d
    return sorted(votes, key=lambda t: (-votes[t], sums[t], t))[0]


def test_knn_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        index = _random_index(rng, n_tracks=int(rng.integers(2, 8)), per_track=int(rng.integers(3, 12)), dim=6)
        k = int(rng.integers(1, 8))
        if len(index) <= k:
            continue
        expected = [_oracle_predict(index, r, k) for r in range(len(index))]
        assert knn_predictions(index, k) == expected


def test_knn_majority():
    index = _angles_index(
        [("Q", 0, 0)] + [("A", i, 5 * (i + 1)) for i in range(5)] + [("B", i, 120 + i) for i in range(3)]
    )
    assert knn_predict(index, ("Q", 0), k=5) == "A"


def test_knn_tie_goes_to_smaller_summed_distance():
    # T1 holds the single nearest neighbour but T2's pair is nearer in total
    index = _angles_index(
        [
            ("Z", 0, 0),
            ("Z", 1, 180),
            ("T1", 0, 5),
            ("T2", 0, 10),
            ("T2", 1, 20),
            ("T3", 0, 30),
            ("T1", 1, 35),
        ]
    )
    assert knn_predict(index, ("Z", 0), k=5) == "T2"
    assert knn_predict(index, ("Z", 0), k=1) == "T1"


def test_knn_full_tie_is_lexicographic():
    index = _angles_index([("Z", 0, 0), ("b", 0, 10), ("a", 0, -10), ("Z", 1, 170)])
    assert knn_predict(index, ("Z", 0), k=2) == "a"


def test_knn_rotation_invariant(rng):
    index = _random_index(rng, 5, 8, dim=6)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    rotated = EmbeddingIndex(index.instrument, 0, index.keys, index.embeddings @ q)
    assert knn_predictions(index, 5) == knn_predictions(rotated, 5)


def test_knn_clustered_tracks_are_perfect(rng):
    centres = np.linalg.qr(rng.standard_normal((32, 32)))[0][:6]
    keys, rows = [], []
    for t, c in enumerate(centres):
        for s in range(10):
            keys.append((f"T{t}", s))
            rows.append(c + 0.01 * rng.standard_normal(32))
    index = EmbeddingIndex("bass", 0, keys, np.array(rows))
    assert knn_accuracy(index, 5) == 1.0


def test_knn_random_embeddings_near_chance():
    accs = [knn_accuracy(_random_index(np.random.default_rng(s), 19, 40, dim=16), 5) for s in range(5)]
    assert abs(float(np.mean(accs)) - 1.0 / 19.0) <= 0.05


def test_knn_errors(rng):
    index = _random_index(rng, 2, 2)
    with pytest.raises(StemSimError) as e:
        knn_accuracy(index, 0)
    assert e.value.code == ErrorCode.VALIDATION_ERROR
    with pytest.raises(StemSimError) as e:
        knn_accuracy(index, 4)
    assert e.value.code == ErrorCode.PRECONDITION_FAILED
    with pytest.raises(StemSimError) as e:
        knn_predict(_random_index(rng, 3, 3), ("T09", 0), k=2)
    assert e.value.code == ErrorCode.NOT_FOUND


def test_knn_zero_embedding_is_degenerate():
    index = EmbeddingIndex("drums", 0, [("A", 0), ("A", 1), ("B", 0)], np.array([[1.0, 0], [0, 0], [0, 1.0]]))
    with pytest.raises(StemSimError) as e:
        knn_accuracy(index, 1)
    assert e.value.code == ErrorCode.DEGENERATE_INPUT


# --- centroids and distance matrices --------------------------------------------


def test_centroid_cases():
    index = EmbeddingIndex(
        "drums",
        0,
        [("A", 0), ("B", 0), ("B", 1)],
        np.array([[0.6, 0.8], [1.0, 0.0], [-1.0, 0.0]]),
    )
    np.testing.assert_array_equal(centroid(index, "A"), [0.6, 0.8])
    np.testing.assert_array_equal(centroid(index, "B"), [0.0, 0.0])
    with pytest.raises(StemSimError) as e:
        centroid(index, "C")
    assert e.value.code == ErrorCode.NOT_FOUND
    with pytest.raises(StemSimError) as e:
        index_distance_matrix(index)
    assert e.value.code == ErrorCode.DEGENERATE_INPUT
    assert e.value.details["tracks"] == ["B"]


def test_distance_matrix_cases(rng):
    m = distance_matrix(list(np.eye(3)), ["A", "B", "C"])
    np.testing.assert_allclose(m.values, 1.0 - np.eye(3), atol=1e-12)

    same = distance_matrix([np.array([3.0, 4.0])] * 4)
    np.testing.assert_array_equal(same.values, np.zeros((4, 4)))

    r = distance_matrix(list(rng.standard_normal((7, 5))))
    np.testing.assert_array_equal(r.values, r.values.T)
    np.testing.assert_array_equal(np.diag(r.values), 0.0)
    assert np.all((r.values >= 0.0) & (r.values <= 2.0))

    with pytest.raises(StemSimError) as e:
        distance_matrix(list(np.eye(3)), ["A", "B"])
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH


def test_index_distance_matrix_orders_tracks(rng):
    index = _random_index(rng, 4, 3)
    m = index_distance_matrix(index)
    assert m.track_ids == ["T00", "T01", "T02", "T03"]
    assert m.role == "drums"


def test_average_matrices(rng):
    a = _random_matrix(rng, 5)
    b = _random_matrix(rng, 5)
    avg = average_matrices([a, b])
    np.testing.assert_allclose(avg.values, (a.values + b.values) / 2.0, atol=1e-15)
    assert avg.trials == 2
    with pytest.raises(StemSimError) as e:
        average_matrices([])
    assert e.value.code == ErrorCode.EMPTY_RESULT
    with pytest.raises(StemSimError) as e:
        average_matrices([a, _random_matrix(rng, 5, ids=list("ABCDE"))])
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH


# --- correlation -----------------------------------------------------------------


def _textbook_pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = math.sqrt(sum((a - mx) ** 2 for a in x)) * math.sqrt(sum((b - my) ** 2 for b in y))
    return num / den


def _average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for p in range(i, j + 1):
            ranks[order[p]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _oracle_spearman(a, b):
    n = len(a)
    rhos = []
    for j in range(n):
        col_a = [a[i][j] for i in range(n) if i != j]
        col_b = [b[i][j] for i in range(n) if i != j]
        rhos.append(_textbook_pearson(_average_ranks(col_a), _average_ranks(col_b)))
    return sum(rhos) / n


def test_pearson_matches_textbook_formula():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b = _random_matrix(rng, 19), _random_matrix(rng, 19)
        iu = np.triu_indices(19, k=1)
        expected = _textbook_pearson(list(a.values[iu]), list(b.values[iu]))
        assert pearson_upper(a, b) == pytest.approx(expected, abs=1e-12)


def test_spearman_matches_rank_oracle_with_ties():
    rng = np.random.default_rng(5)
    for _ in range(100):
        a = _random_matrix(rng, 19, values=rng.integers(0, 5, (19, 19)).astype(float))
        b = _random_matrix(rng, 19, values=rng.integers(0, 5, (19, 19)).astype(float))
        assert spearman_avg(a, b) == pytest.approx(_oracle_spearman(a.values, b.values), abs=1e-12)


def test_correlation_invariances(rng):
    a = _random_matrix(rng, 19)
    assert pearson_upper(a, a) == pytest.approx(1.0)
    assert spearman_avg(a, a) == pytest.approx(1.0)

    affine = DistanceMatrix(a.track_ids, 2.0 * a.values + 0.1)
    assert pearson_upper(a, affine) == pytest.approx(1.0)

    monotone = DistanceMatrix(a.track_ids, np.exp(3.0 * a.values))
    assert spearman_avg(a, monotone) == pytest.approx(1.0)

    reversed_ = DistanceMatrix(a.track_ids, 10.0 - a.values)
    np.fill_diagonal(reversed_.values, 0.0)
    assert spearman_avg(a, reversed_) == pytest.approx(-1.0)
    assert pearson_upper(a, reversed_) == pytest.approx(-1.0)


def test_correlation_errors(rng):
    with pytest.raises(StemSimError) as e:
        pearson_upper(_random_matrix(rng, 2), _random_matrix(rng, 2))
    assert e.value.code == ErrorCode.PRECONDITION_FAILED
    with pytest.raises(StemSimError) as e:
        spearman_avg(_random_matrix(rng, 4), _random_matrix(rng, 5))
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH
    with pytest.raises(StemSimError) as e:
        spearman_avg(_random_matrix(rng, 4), _random_matrix(rng, 4, ids=list("ABCD")))
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH
    flat = DistanceMatrix([f"T{i:02d}" for i in range(4)], 1.0 - np.eye(4))
    with pytest.raises(StemSimError) as e:
        pearson_upper(flat, _random_matrix(rng, 4))
    assert e.value.code == ErrorCode.DEGENERATE_INPUT


def test_correlation_table(rng):
    mats = [_random_matrix(rng, 6, role=r) for r in ("mix", "drums", "bass")]
    table = correlation_table(mats, "spearman")
    values = np.array(table["values"])
    assert table["roles"] == ["mix", "drums", "bass"]
    np.testing.assert_array_equal(values, values.T)
    np.testing.assert_array_equal(np.diag(values), 1.0)
    assert values[0, 1] == spearman_avg(mats[0], mats[1])
    assert correlation_table(mats, "pearson")["values"][1][2] == pearson_upper(mats[1], mats[2])
    with pytest.raises(StemSimError) as e:
        correlation_table(mats, "kendall")
    assert e.value.code == ErrorCode.VALIDATION_ERROR

    assert cross_role_tables(mats[:1]) == {}
    assert set(cross_role_tables(mats)) == {"pearson", "spearman"}


# --- query and listening sets -----------------------------------------------------


def test_query_similar_cases(rng):
    m = _matrix_from_pairs(["A", "B", "C"], {("A", "B"): 0.1, ("A", "C"): 0.5, ("B", "C"): 0.3})
    assert query_similar(m, "A", 2) == [("B", 0.1), ("C", 0.5)]
    assert query_similar(m, "A", 0) == []

    flat = DistanceMatrix(list("DCAB"), 0.5 * (1.0 - np.eye(4)))
    assert [t for t, _ in query_similar(flat, "D", 3)] == ["A", "B", "C"]

    r = _random_matrix(rng, 7)
    ranked = query_similar(r, "T03", 6)
    assert sorted(t for t, _ in ranked) == sorted(set(r.track_ids) - {"T03"})
    assert [d for _, d in ranked] == sorted(d for _, d in ranked)

    with pytest.raises(StemSimError) as e:
        query_similar(m, "Z", 1)
    assert e.value.code == ErrorCode.NOT_FOUND
    with pytest.raises(StemSimError) as e:
        query_similar(m, "A", -1)
    assert e.value.code == ErrorCode.VALIDATION_ERROR


def _top2(matrix, track):
    return {t for t, _ in query_similar(matrix, track, 2)}


def test_random_listening_sets_are_valid():
    rng = np.random.default_rng(21)
    focused = _random_matrix(rng, 19, role="drums")
    mix = _random_matrix(rng, 19, role="mix")
    sets = build_listening_sets(focused, mix, np.random.default_rng(0), 1000)
    assert len(sets) == 1000
    for s in sets:
        assert len({s.anchor, s.positive, s.negative}) == 3
        pos_pool, neg_pool = _top2(focused, s.anchor), _top2(mix, s.anchor)
        assert not pos_pool & neg_pool
        assert s.positive in pos_pool
        assert s.negative in neg_pool
        assert s.role == "drums" and s.contrast_role == "mix"


def test_overlapping_pools_are_redrawn():
    ids = list("ABCDE")
    focused = _matrix_from_pairs(
        ids,
        {
            ("A", "B"): 0.1, ("A", "C"): 0.2, ("A", "D"): 0.8, ("A", "E"): 0.9,
            ("B", "C"): 0.15, ("B", "D"): 0.7, ("B", "E"): 0.6,
            ("C", "D"): 0.5, ("C", "E"): 0.4, ("D", "E"): 0.3,
        },
        role="drums",
    )
    mix = _matrix_from_pairs(
        ids,
        {
            ("A", "C"): 0.1, ("A", "D"): 0.2, ("A", "B"): 0.8, ("A", "E"): 0.9,
            ("B", "D"): 0.1, ("B", "E"): 0.2, ("B", "C"): 0.7,
            ("C", "D"): 0.5, ("C", "E"): 0.6, ("D", "E"): 0.3,
        },
        role="mix",
    )
    sets = build_listening_sets(focused, mix, np.random.default_rng(2), 200)
    assert all(s.anchor != "A" for s in sets)
    from_b = [s for s in sets if s.anchor == "B"]
    assert from_b
    assert all(s.positive in {"A", "C"} and s.negative in {"D", "E"} for s in from_b)


def test_identical_matrices_fail_construction(rng):
    m = _random_matrix(rng, 6)
    with pytest.raises(StemSimError) as e:
        build_listening_sets(m, m, np.random.default_rng(0), 1, max_retries=50)
    assert e.value.code == ErrorCode.CONSTRUCTION_FAILURE


def test_listening_set_preconditions(rng):
    with pytest.raises(StemSimError) as e:
        build_listening_sets(_random_matrix(rng, 3), _random_matrix(rng, 3), rng, 1)
    assert e.value.code == ErrorCode.PRECONDITION_FAILED
    with pytest.raises(StemSimError) as e:
        build_listening_sets(_random_matrix(rng, 5), _random_matrix(rng, 5, ids=list("ABCDE")), rng, 1)
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH
    assert build_listening_sets(_random_matrix(rng, 5), _random_matrix(rng, 5, role="x"), rng, 0) == []


def test_mix_sets_draw_from_every_contrast():
    rng = np.random.default_rng(8)
    focused = _random_matrix(rng, 12, role="mix")
    contrasts = [(r, _random_matrix(rng, 12, role=r)) for r in ("drums", "bass", "piano", "guitar")]
    sets = build_listening_sets(focused, contrasts, np.random.default_rng(1), 400)
    assert {s.contrast_role for s in sets} == {"drums", "bass", "piano", "guitar"}
    by_role = dict(contrasts)
    for s in sets:
        assert s.negative in _top2(by_role[s.contrast_role], s.anchor)


def test_mix_sets_need_a_contrast_matrix():
    focused = _random_matrix(np.random.default_rng(8), 12, role="mix")
    with pytest.raises(StemSimError) as e:
        build_listening_sets(focused, [], np.random.default_rng(1), 4)
    assert e.value.code == ErrorCode.NOT_FOUND


def test_listening_sets_deterministic(rng):
    focused, mix = _random_matrix(rng, 10), _random_matrix(rng, 10, role="mix")
    a = build_listening_sets(focused, mix, np.random.default_rng(4), 20)
    b = build_listening_sets(focused, mix, np.random.default_rng(4), 20)
    assert a == b


def test_export_snippets(small_corpus, tmp_path):
    manifest = load_manifest(small_corpus)
    ids = sorted(t.track_id for t in manifest.split("test"))
    m = _random_matrix(np.random.default_rng(0), len(ids), ids=ids, role="drums")
    contrast = _random_matrix(np.random.default_rng(1), len(ids), ids=ids, role="mix")
    sets = build_listening_sets(m, contrast, np.random.default_rng(2), 2)

    filled = export_snippets(sets, manifest, tmp_path / "sets", snippet_seconds=2.0)
    files = sorted((tmp_path / "sets").glob("*.wav"))
    assert len(files) == 6
    for i, s in enumerate(filled):
        for position in ("anchor", "positive", "negative"):
            track = getattr(s, position)
            clip = load_track(snippet_path(tmp_path / "sets", i, position, track), manifest.sample_rate)
            assert clip.duration == pytest.approx(2.0)
            assert track in s.snippet_offsets
            assert 0.0 <= s.snippet_offsets[track] <= 4.0

    # asking for more than the track holds gives a shorter clip
    long_ = export_snippets(sets[:1], manifest, tmp_path / "long", snippet_seconds=60.0)
    clip = load_track(snippet_path(tmp_path / "long", 0, "anchor", long_[0].anchor), manifest.sample_rate)
    assert clip.duration == pytest.approx(6.0)


def test_export_snippets_unknown_role(small_corpus, tmp_path):
    manifest = load_manifest(small_corpus)
    ids = sorted(t.track_id for t in manifest.split("test"))
    m = _random_matrix(np.random.default_rng(0), len(ids), ids=ids, role="vocals")
    sets = build_listening_sets(m, _random_matrix(np.random.default_rng(1), len(ids), ids=ids), np.random.default_rng(2), 1)
    with pytest.raises(StemSimError) as e:
        export_snippets(sets, manifest, tmp_path)
    assert e.value.code == ErrorCode.NOT_FOUND


# --- embedding and reports ---------------------------------------------------------


def _model(arch, role="drums", trial=0):
    return TrainedModel(role=role, trial=trial, params=init_params(arch, 10 + trial), loss_history=[], config={})


def _segments(arch, n_tracks=4, per_track=3, role="drums", seed=0):
    rng = np.random.default_rng(seed)
    return [
        MelSpectrogram(f"T{t}", role, s, rng.standard_normal(arch.input_shape).astype(np.float32))
        for t in range(n_tracks)
        for s in range(per_track)
    ]


def test_embed_corpus(tiny_arch):
    model = _model(tiny_arch)
    segments = _segments(tiny_arch)
    index = embed_corpus(model, list(reversed(segments)))
    assert len(index) == 12
    assert index.keys[:3] == [("T0", 0), ("T0", 1), ("T0", 2)]
    np.testing.assert_allclose(np.linalg.norm(index.embeddings, axis=1), 1.0, atol=1e-6)
    again = embed_corpus(model, segments)
    np.testing.assert_array_equal(index.embeddings, again.embeddings)

    empty = embed_corpus(model, [])
    assert len(empty) == 0

    with pytest.raises(StemSimError) as e:
        embed_corpus(model, _segments(tiny_arch, role="bass"))
    assert e.value.code == ErrorCode.VALIDATION_ERROR


def test_evaluate_role(tiny_arch):
    models = [_model(tiny_arch, trial=t) for t in (1, 0)]
    result = evaluate_role(models, _segments(tiny_arch, n_tracks=5, per_track=4), k=3)
    assert [i.trial for i in result.indices] == [0, 1]
    assert all(0.0 <= a <= 1.0 for a in result.accuracies)
    assert result.averaged.trials == 2
    report = result.to_json()
    assert report["trials"] == 2
    assert report["n_tracks"] == 5
    assert report["n_segments"] == 20
    assert report["accuracy_variance"] == pytest.approx(float(np.var(result.accuracies)))
    assert -1.0 <= report["trial_consistency_spearman"] <= 1.0

    assert trial_consistency(result.matrices[:1]) is None
    with pytest.raises(StemSimError) as e:
        evaluate_role([], [], k=3)
    assert e.value.code == ErrorCode.EMPTY_RESULT


# --- files -----------------------------------------------------------------------


def test_embedding_files(tmp_path, rng):
    index = _random_index(rng, 3, 4, dim=5)
    csv_index = read_embeddings_csv(write_embeddings_csv(tmp_path / "e.csv", index), "drums")
    assert csv_index.keys == index.keys
    np.testing.assert_array_equal(csv_index.embeddings, index.embeddings)

    path = write_embeddings_bin(tmp_path / "e.bin", index)
    loaded = read_embeddings_bin(path)
    assert (loaded.instrument, loaded.trial, loaded.keys) == ("drums", 0, index.keys)
    np.testing.assert_array_equal(loaded.embeddings, index.embeddings)

    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(StemSimError) as e:
        read_embeddings_bin(path)
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH


def test_matrix_files(tmp_path, rng):
    m = _random_matrix(rng, 4)
    loaded = read_matrix_csv(write_matrix_csv(tmp_path / "m.csv", m), role="drums")
    assert loaded.track_ids == m.track_ids
    np.testing.assert_array_equal(loaded.values, m.values)

    (tmp_path / "bad.csv").write_text(",A,B\nB,0,1\nA,1,0\n", encoding="utf-8")
    with pytest.raises(StemSimError) as e:
        read_matrix_csv(tmp_path / "bad.csv")
    assert e.value.code == ErrorCode.VALIDATION_ERROR

    data = write_pgm(tmp_path / "m.pgm", m, cell=3).read_bytes()
    assert data.startswith(b"P5\n12 12\n255\n")
    pixels = np.frombuffer(data[len(b"P5\n12 12\n255\n"):], dtype=np.uint8).reshape(12, 12)
    assert pixels[0, 0] == 0
    assert pixels.max() == 255


def test_listening_set_file(tmp_path, rng):
    sets = build_listening_sets(_random_matrix(rng, 8), _random_matrix(rng, 8, role="mix"), rng, 3)
    assert read_listening_sets(write_listening_sets(tmp_path / "sets.json", sets)) == sets
