"""Command-line front end: simulate | loss | assign | diarize | score | pipeline.

Machine-readable output (JSON or RTTM) goes to stdout; progress, warnings,
and tables go to stderr. Exit codes: 0 success, 1 I/O or parse problems,
2 infeasibility or constraint violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .assignment import (cost_matrix_from_timeline, dp_backend, graph_pit_vad_loss,
                         solve_brute_force, solve_dp)
from .clustering import assemble_diarization, cluster, derive_cannot_links
from .config import PipelineConfig, load_config
from .decoding import DecodedUtterance, decode, decoded_to_json
from .diarization import Diarization, parse_rttm, write_rttm
from .embeddings import FrameEmbeddings, aggregate_embedding
from .errors import (ConstraintViolationError, DegenerateEmbeddingError,
                     InfeasibleError, InvalidInputError, PlacementError,
                     RttmParseError, UndefinedDerError)
from .losses import combine, embedding_loss, ubd_loss
from .scores import ScoreMatrix
from .scoring import DerReport, ZERO_TIMES, score_corpus, score_error_times
from .simulate import Meeting, make_meeting, overlap_ratio, write_meeting
from .timeline import (LabelMatrix, Timeline, activity_counts,
                       build_overlap_graph, render_reference)

USAGE_ERRORS = (InvalidInputError, RttmParseError, UndefinedDerError,
                DegenerateEmbeddingError, OSError, json.JSONDecodeError)
CONSTRAINT_ERRORS = (InfeasibleError, ConstraintViolationError, PlacementError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(message)


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _load_timeline(path) -> Timeline:
    return Timeline.from_json(Path(path).read_text())


def _violating_clique(timeline: Timeline, num_channels: int) -> str:
    counts = activity_counts(timeline)
    over = np.flatnonzero(counts > num_channels)
    if over.size == 0:
        return ""
    frame = int(over[0])
    ids = sorted(u.id for u in timeline.utterances if u.start <= frame < u.end)
    return (f"; {len(ids)} utterances {ids} are simultaneously active at "
            f"frame {frame}")


def diarize_posteriors(vad: ScoreMatrix, ubd: ScoreMatrix,
                       embeddings: FrameEmbeddings, config: PipelineConfig,
                       recording_id: str,
                       num_speakers: int | None = None) -> Diarization:
    """Posteriors -> decoded utterances -> clustered speakers -> diarization."""
    utterances = decode(vad, ubd, config.decoder)
    if not utterances:
        return Diarization(recording_id, {})
    utterance_embeddings = [
        aggregate_embedding(embeddings, vad, utt, utterance_id=i)
        for i, utt in enumerate(utterances, 1)
    ]
    constraints = derive_cannot_links(utterances)
    if num_speakers is None:
        num_speakers = config.clustering.num_speakers
    result = cluster(utterance_embeddings, constraints,
                     num_speakers=num_speakers,
                     stop_threshold=config.clustering.stop_threshold)
    if result.infeasible:
        _info(f"warning: cannot-link constraints prevent merging down to "
              f"{num_speakers} speakers for {recording_id}; "
              f"returning {result.num_clusters}")
    return assemble_diarization(utterances, result.labels, config.frame_rate,
                                recording_id=recording_id)


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    sim = config.simulator
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(replace(sim, seed=sim.seed + i), config.channels, str(out_dir),
              f"meeting{i:04d}") for i in range(args.count)]
    if args.jobs > 1 and tasks:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            stats = list(pool.map(_simulate_worker, tasks))
    else:
        stats = [_simulate_worker(t) for t in tasks]
    _emit(_corpus_stats(stats, out_dir))
    return 0


def _simulate_worker(task) -> dict:
    sim_config, channels, out_dir, meeting_id = task
    meeting = make_meeting(sim_config, channels, meeting_id)
    write_meeting(meeting, out_dir)
    return _meeting_stats(meeting)


def _meeting_stats(meeting: Meeting) -> dict:
    return {
        "meeting_id": meeting.meeting_id,
        "num_speakers": len(meeting.timeline.speakers),
        "num_utterances": meeting.timeline.num_utterances,
        "overlap_ratio": overlap_ratio(meeting.timeline),
    }


def _corpus_stats(stats: list[dict], out_dir: Path) -> dict:
    histogram: dict[str, int] = {}
    for s in stats:
        histogram[str(s["num_speakers"])] = histogram.get(str(s["num_speakers"]), 0) + 1
    ratios = [s["overlap_ratio"] for s in stats]
    return {
        "count": len(stats),
        "out_dir": str(out_dir),
        "mean_overlap_ratio": float(np.mean(ratios)) if ratios else 0.0,
        "speaker_histogram": dict(sorted(histogram.items())),
        "total_utterances": sum(s["num_utterances"] for s in stats),
    }


def _cmd_loss(args) -> int:
    config = load_config(args.config)
    timeline = _load_timeline(args.timeline)
    vad = ScoreMatrix.read_csv(args.vad, "vad")
    ubd = ScoreMatrix.read_csv(args.ubd, "ubd")
    embeddings = FrameEmbeddings.read_csv(args.emb)
    num_channels = vad.num_channels
    labels = LabelMatrix.from_timeline(timeline, "vad")
    try:
        vad_loss, optimal = graph_pit_vad_loss(labels, vad, timeline, num_channels)
    except InfeasibleError as exc:
        raise InfeasibleError(str(exc) + _violating_clique(timeline, num_channels))
    ubd_reference = render_reference(timeline, optimal, "ubd")
    onset_loss = ubd_loss(ubd_reference, ubd, config.ubd_widen_width)

    emb_loss = 0.0
    labeled = [u for u in timeline.utterances if u.speaker is not None]
    if len(labeled) >= 2 and len(labeled) == timeline.num_utterances:
        pairs = []
        for u in timeline.utterances:
            span = DecodedUtterance(u.start, u.end, optimal.channel(u.id), 1.0)
            emb = aggregate_embedding(embeddings, vad, span, utterance_id=u.id)
            pairs.append((emb.vector, u.speaker))
        emb_loss = embedding_loss(pairs)
    else:
        _info("warning: fewer than 2 speaker-labeled utterances; "
              "embedding loss set to 0")

    breakdown = combine((vad_loss, onset_loss, emb_loss), config.weights)
    _emit(breakdown.to_dict())
    return 0


def _cmd_assign(args) -> int:
    timeline = _load_timeline(args.timeline)
    vad = ScoreMatrix.read_csv(args.vad, "vad")
    num_channels = args.channels
    if num_channels != vad.num_channels:
        raise InvalidInputError(
            f"--channels {num_channels} but VAD CSV has {vad.num_channels} columns"
        )
    cost = cost_matrix_from_timeline(timeline, vad)
    graph = build_overlap_graph(timeline)
    try:
        if args.solver == "brute":
            result = solve_brute_force(graph, cost, num_channels)
        else:
            result = solve_dp(graph, cost, timeline, num_channels)
    except InfeasibleError as exc:
        raise InfeasibleError(str(exc) + _violating_clique(timeline, num_channels))
    _emit({
        "solver": args.solver,
        "backend": dp_backend() if args.solver == "dp" else "exhaustive",
        "channels": list(result.assignment.channel_of),
        "loss": result.loss,
        "explored_states": result.explored_states,
    })
    return 0


def _cmd_diarize(args) -> int:
    config = load_config(args.config)
    vad = ScoreMatrix.read_csv(args.vad, "vad")
    ubd = ScoreMatrix.read_csv(args.ubd, "ubd")
    embeddings = FrameEmbeddings.read_csv(args.emb)
    if args.dump_utterances:
        utterances = decode(vad, ubd, config.decoder)
        Path(args.dump_utterances).write_text(
            decoded_to_json(utterances, vad.num_frames, config.frame_rate, indent=2)
            + "\n"
        )
    diarization = diarize_posteriors(vad, ubd, embeddings, config,
                                     recording_id=args.recording_id,
                                     num_speakers=args.num_speakers)
    text = write_rttm(diarization)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_score(args) -> int:
    references = parse_rttm(Path(args.ref).read_text())
    hypotheses = {d.recording_id: d
                  for d in parse_rttm(Path(args.hyp).read_text())}
    reports, aggregate, warnings = score_corpus(references, hypotheses,
                                                collar=args.collar)
    for warning in warnings:
        _info(f"warning: {warning}")
    _print_der_table(reports, aggregate)
    _emit({
        "collar": args.collar,
        "aggregate": aggregate.to_dict(),
        "recordings": {rec: (r.to_dict() if r else None)
                       for rec, r in reports.items()},
    })
    return 0


def _print_der_table(reports: dict, aggregate: DerReport) -> None:
    header = f"{'recording':<20} {'DER':>7} {'MI':>7} {'FA':>7} {'CF':>7} {'scored(s)':>10}"
    _info(header)
    _info("-" * len(header))
    for rec in sorted(reports):
        r = reports[rec]
        if r is None:
            _info(f"{rec:<20} {'--':>7} {'--':>7} {'--':>7} {'--':>7} {0.0:>10.2f}")
        else:
            _info(f"{rec:<20} {r.der:>7.2f} {r.miss:>7.2f} {r.false_alarm:>7.2f} "
                  f"{r.confusion:>7.2f} {r.scored_time:>10.2f}")
    _info("-" * len(header))
    _info(f"{'ALL':<20} {aggregate.der:>7.2f} {aggregate.miss:>7.2f} "
          f"{aggregate.false_alarm:>7.2f} {aggregate.confusion:>7.2f} "
          f"{aggregate.scored_time:>10.2f}")


def _cmd_pipeline(args) -> int:
    config = load_config(args.config)
    sim = config.simulator
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(replace(sim, seed=sim.seed + i), config, str(out_dir),
              f"meeting{i:04d}") for i in range(args.count)]
    if args.jobs > 1 and tasks:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_pipeline_worker, tasks))
    else:
        results = [_pipeline_worker(t) for t in tasks]

    total = ZERO_TIMES
    recordings: dict[str, dict | None] = {}
    for meeting_id, times, report in results:
        total = total + times
        recordings[meeting_id] = report
    aggregate = DerReport.from_times(total)
    _emit({
        "count": args.count,
        "collar": config.collar,
        "aggregate": aggregate.to_dict(),
        "recordings": recordings,
    })
    return 0


def _pipeline_worker(task):
    sim_config, config, out_dir, meeting_id = task
    meeting = make_meeting(sim_config, config.channels, meeting_id)
    directory = write_meeting(meeting, out_dir)
    hypothesis = diarize_posteriors(meeting.vad, meeting.ubd, meeting.embeddings,
                                    config, recording_id=meeting_id)
    (directory / "hyp.rttm").write_text(write_rttm(hypothesis))
    times = score_error_times(meeting.reference, hypothesis, collar=config.collar)
    report = DerReport.from_times(times).to_dict() if times.ref_ms else None
    return meeting_id, times, report


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uttdiar",
                     description="Utterance-by-utterance diarization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated meeting corpus")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--count", type=int, required=True, help="number of meetings")
    p.add_argument("--seed", type=int, default=None, help="base seed override")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("loss", help="multi-task loss from ground truth + posteriors")
    p.add_argument("--timeline", required=True)
    p.add_argument("--vad", required=True)
    p.add_argument("--ubd", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("assign", help="optimal utterance-to-channel assignment")
    p.add_argument("--timeline", required=True)
    p.add_argument("--vad", required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--solver", choices=("dp", "brute"), default="dp")
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("diarize", help="posterior CSVs -> hypothesis RTTM")
    p.add_argument("--vad", required=True)
    p.add_argument("--ubd", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", default=None, help="RTTM path (default stdout)")
    p.add_argument("--num-speakers", type=int, default=None)
    p.add_argument("--recording-id", default="recording")
    p.add_argument("--dump-utterances", default=None,
                   help="also write decoded utterances as timeline JSON")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_diarize)

    p = sub.add_parser("score", help="DER between reference and hypothesis RTTMs")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--collar", type=float, default=0.25)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("pipeline", help="simulate, diarize, and score in one run")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CONSTRAINT_ERRORS as exc:
        _info(f"error: {exc}")
        return 2
    except USAGE_ERRORS as exc:
        _info(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
