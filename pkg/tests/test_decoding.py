"""Posterior binarization, onset splitting, and the decode round trip."""

import numpy as np
import pytest

from uttdiar.decoding import (DecodedUtterance, DecoderConfig, binarize_vad,
                              decode, decoded_from_json, decoded_to_json,
                              split_on_ubd)
from uttdiar.errors import InvalidInputError
from uttdiar.scores import CLAMP_MAX, CLAMP_MIN, ScoreMatrix
from uttdiar.simulate import first_fit_assignment
from uttdiar.timeline import max_concurrency, render_reference

from test_timeline import make_timeline, random_timeline

EXACT = DecoderConfig(median_window=1, min_gap=1, min_duration=1)


def saturated(reference):
    return ScoreMatrix(np.where(np.asarray(reference) == 1, CLAMP_MAX, CLAMP_MIN),
                       "vad")


def oracle_posteriors(timeline, num_channels):
    assignment = first_fit_assignment(timeline, num_channels)
    vad = saturated(render_reference(timeline, assignment, "vad"))
    ubd = ScoreMatrix(
        np.where(render_reference(timeline, assignment, "ubd") == 1,
                 CLAMP_MAX, CLAMP_MIN), "ubd")
    return vad, ubd, assignment


class TestBinarizeVad:
    def test_constant_high_scores(self):
        scores = ScoreMatrix(np.full((30, 2), 0.9), "vad")
        assert binarize_vad(scores, 0.5, 5).all()

    def test_median_suppresses_singleton_spike(self):
        values = np.full((30, 1), 0.1)
        values[15, 0] = 0.9
        binary = binarize_vad(ScoreMatrix(values, "vad"), 0.5, 5)
        assert binary.sum() == 0

    def test_even_window_rejected(self):
        scores = ScoreMatrix(np.full((10, 1), 0.5), "vad")
        with pytest.raises(InvalidInputError):
            binarize_vad(scores, 0.5, 4)

    def test_threshold_out_of_range_rejected(self):
        scores = ScoreMatrix(np.full((10, 1), 0.5), "vad")
        with pytest.raises(InvalidInputError):
            binarize_vad(scores, 1.0, 5)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(23)
        values = rng.uniform(0.01, 0.99, (40, 3))
        scores = ScoreMatrix(values, "vad")
        window, threshold = 7, 0.45
        binary = binarize_vad(scores, threshold, window)
        half = window // 2
        for t in range(40):
            for c in range(3):
                neighborhood = [values[min(max(t + d, 0), 39), c]
                                for d in range(-half, half + 1)]
                expected = 1 if sorted(neighborhood)[half] >= threshold else 0
                assert binary[t, c] == expected


class TestSplitOnUbd:
    def test_single_interior_peak_splits_run(self):
        binary = np.zeros((120, 1), dtype=np.uint8)
        binary[0:100, 0] = 1
        ubd = np.full((120, 1), 0.01)
        ubd[40, 0] = 0.9
        utts = split_on_ubd(binary, ScoreMatrix(ubd, "ubd"), 0.3, 10)
        assert [(u.start, u.end) for u in utts] == [(0, 40), (40, 100)]

    def test_run_without_peaks_stays_whole(self):
        binary = np.zeros((50, 1), dtype=np.uint8)
        binary[5:45, 0] = 1
        ubd = ScoreMatrix(np.full((50, 1), 0.01), "ubd")
        utts = split_on_ubd(binary, ubd, 0.3, 10)
        assert [(u.start, u.end) for u in utts] == [(5, 45)]

    def test_close_peaks_keep_higher(self):
        binary = np.zeros((100, 1), dtype=np.uint8)
        binary[0:80, 0] = 1
        ubd = np.full((100, 1), 0.01)
        ubd[30, 0] = 0.5
        ubd[33, 0] = 0.8
        utts = split_on_ubd(binary, ScoreMatrix(ubd, "ubd"), 0.3, min_gap=5)
        assert [(u.start, u.end) for u in utts] == [(0, 33), (33, 80)]

    def test_peak_at_run_start_ignored(self):
        binary = np.zeros((60, 1), dtype=np.uint8)
        binary[10:50, 0] = 1
        ubd = np.full((60, 1), 0.01)
        ubd[10, 0] = 0.9
        utts = split_on_ubd(binary, ScoreMatrix(ubd, "ubd"), 0.3, 5)
        assert [(u.start, u.end) for u in utts] == [(10, 50)]

    def test_matches_exhaustive_peak_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            values = rng.uniform(0.0, 1.0, 60)
            threshold, min_gap = 0.4, 4
            binary = np.ones((60, 1), dtype=np.uint8)
            utts = split_on_ubd(binary, ScoreMatrix(values[:, None], "ubd"),
                                threshold, min_gap)
            candidates = []
            for t in range(60):
                v = values[t]
                left = values[t - 1] if t > 0 else -1.0
                right = values[t + 1] if t + 1 < 60 else -1.0
                if v >= threshold and v >= left and v >= right:
                    candidates.append(t)
            kept = []
            for t in sorted(candidates, key=lambda t: (-values[t], t)):
                if all(abs(t - k) >= min_gap for k in kept):
                    kept.append(t)
            expected_bounds = [0] + sorted(k for k in kept if k > 0) + [60]
            expected = list(zip(expected_bounds[:-1], expected_bounds[1:]))
            assert [(u.start, u.end) for u in utts] == expected


class TestDecode:
    def test_all_silent_decodes_empty(self):
        vad = ScoreMatrix(np.full((40, 2), 0.01), "vad")
        ubd = ScoreMatrix(np.full((40, 2), 0.01), "ubd")
        assert decode(vad, ubd) == []

    def test_oracle_round_trip_with_defaults(self):
        # Default thresholds assume utterances much longer than the median
        # window, as the simulator produces.
        timeline = make_timeline([(0, 200), (150, 400), (500, 700)], 800)
        vad, ubd, _ = oracle_posteriors(timeline, 2)
        decoded = decode(vad, ubd)
        assert sorted((u.start, u.end) for u in decoded) == \
            sorted((u.start, u.end) for u in timeline.utterances)

    def test_adjacent_same_channel_pair_split_at_onset(self):
        # Worst case: two utterances land back-to-back on one channel; only
        # the onset spike reveals the boundary.
        timeline = make_timeline([(0, 100), (100, 220)], 300)
        vad, ubd, assignment = oracle_posteriors(timeline, 2)
        assert assignment.channel_of == (1, 1)
        decoded = decode(vad, ubd)
        assert [(u.start, u.end) for u in decoded] == [(0, 100), (100, 220)]
        assert decoded[0].channel == decoded[1].channel == 1

    def test_round_trip_exact_on_random_timelines(self):
        rng = np.random.default_rng(31)
        done = 0
        while done < 40:
            timeline = random_timeline(rng, int(rng.integers(1, 12)), 120,
                                       max_len=20)
            if max_concurrency(timeline) > 3:
                continue
            done += 1
            vad, ubd, assignment = oracle_posteriors(timeline, 3)
            decoded = decode(vad, ubd, EXACT)
            expected = sorted(
                (u.start, u.end, assignment.channel(u.id))
                for u in timeline.utterances)
            assert sorted((u.start, u.end, u.channel) for u in decoded) == expected

    def test_same_channel_outputs_never_overlap(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            vad = ScoreMatrix(rng.uniform(0.0, 1.0, (80, 2)), "vad")
            ubd = ScoreMatrix(rng.uniform(0.0, 1.0, (80, 2)), "ubd")
            decoded = decode(vad, ubd, DecoderConfig(median_window=3,
                                                     min_gap=2, min_duration=1))
            for a in decoded:
                for b in decoded:
                    if a is not b and a.channel == b.channel:
                        assert not a.overlaps(b)

    def test_deterministic(self):
        rng = np.random.default_rng(41)
        vad = ScoreMatrix(rng.uniform(0.0, 1.0, (60, 2)), "vad")
        ubd = ScoreMatrix(rng.uniform(0.0, 1.0, (60, 2)), "ubd")
        assert decode(vad, ubd) == decode(vad, ubd)

    def test_short_utterances_dropped(self):
        vad_values = np.full((60, 1), 0.01)
        vad_values[10:13, 0] = 0.99
        vad = ScoreMatrix(vad_values, "vad")
        ubd = ScoreMatrix(np.full((60, 1), 0.01), "ubd")
        config = DecoderConfig(median_window=1, min_duration=5)
        assert decode(vad, ubd, config) == []

    def test_confidence_is_mean_posterior(self):
        vad_values = np.full((30, 1), 0.01)
        vad_values[5:15, 0] = 0.8
        vad = ScoreMatrix(vad_values, "vad")
        ubd = ScoreMatrix(np.full((30, 1), 0.01), "ubd")
        decoded = decode(vad, ubd, DecoderConfig(median_window=1))
        assert len(decoded) == 1
        assert abs(decoded[0].confidence - 0.8) < 1e-9


class TestDecodedJson:
    def test_round_trip(self):
        utts = [DecodedUtterance(0, 10, 1, 0.9), DecodedUtterance(5, 15, 2, 0.8)]
        doc = decoded_to_json(utts, total_frames=20, frame_rate=100.0)
        again = decoded_from_json(doc)
        assert [(u.start, u.end, u.channel) for u in again] == \
            [(0, 10, 1), (5, 15, 2)]

    def test_malformed_rejected(self):
        with pytest.raises(InvalidInputError):
            decoded_from_json('{"utterances": [{"start": 1}]}')
