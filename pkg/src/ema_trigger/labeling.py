"""Receptivity and emotion labeling of segments.

An answered prompt marks the window-width span ending at the response time as
receptive, and those segments inherit the response's PA score. An unanswered
prompt marks the full 60 minutes after notification (the prompt's lifetime)
as non-receptive. A segment belongs to a span when at least half of its
duration lies inside it, which for spans at least one segment wide is
equivalent to its midpoint falling inside the span. Conflicts resolve as
Receptive > NonReceptive > Unlabeled; among several claiming responses a
segment takes the PA of the nearest-in-time one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from .data import RESPONSE_WINDOW_MIN, Segment


class ReceptivityLabel(Enum):
    RECEPTIVE = "receptive"
    NON_RECEPTIVE = "non_receptive"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class LabeledSegment:
    segment: Segment
    receptivity: ReceptivityLabel
    pa_score: float | None = None
    source_event: int | None = None

    def __post_init__(self):
        if self.pa_score is not None and self.receptivity is not ReceptivityLabel.RECEPTIVE:
            raise ValueError("pa_score only allowed on receptive segments")


def _span_indices(midpoints: np.ndarray, lo: float, hi: float) -> range:
    """Indices of (sorted) segment midpoints falling inside [lo, hi]."""
    start = int(np.searchsorted(midpoints, lo, side="left"))
    stop = int(np.searchsorted(midpoints, hi, side="right"))
    return range(start, stop)


def label_receptivity(segments, events, window_min: int) -> list:
    """Apply the labeling rules to aligned segments; one label per segment."""
    if any(s.width_min != window_min for s in segments):
        raise ValueError("window must equal the segment width")
    segments = sorted(segments, key=lambda s: s.start)
    midpoints = np.array([s.start + s.width_min * 30 for s in segments], dtype=float)

    w_s = window_min * 60
    labels = [ReceptivityLabel.UNLABELED] * len(segments)
    pa = [None] * len(segments)
    source = [None] * len(segments)
    best_dist = [None] * len(segments)

    for ei, e in enumerate(events):
        if e.answered:
            continue
        lo = e.notification_ts
        hi = e.notification_ts + RESPONSE_WINDOW_MIN * 60
        for i in _span_indices(midpoints, lo, hi):
            labels[i] = ReceptivityLabel.NON_RECEPTIVE

    for ei, e in enumerate(events):
        if not e.answered:
            continue
        lo = e.response_ts - w_s
        hi = e.response_ts
        for i in _span_indices(midpoints, lo, hi):
            dist = abs(e.response_ts - midpoints[i])
            if labels[i] is ReceptivityLabel.RECEPTIVE and best_dist[i] is not None:
                if dist >= best_dist[i]:
                    continue
            labels[i] = ReceptivityLabel.RECEPTIVE
            pa[i] = e.pa_score
            source[i] = ei
            best_dist[i] = dist

    out = []
    for seg, lab, score, src in zip(segments, labels, pa, source):
        out.append(
            LabeledSegment(
                segment=seg,
                receptivity=lab,
                pa_score=score if lab is ReceptivityLabel.RECEPTIVE else None,
                source_event=src,
            )
        )
    return out


def label_distribution(labeled, pa_scale=None, bin_width: float = 1.0) -> dict:
    """Class counts plus a fixed-bin PA histogram (plot-ready).

    Bins span the PA scale when given, otherwise the observed score range,
    at `bin_width` per bin.
    """
    counts = {lab: 0 for lab in ReceptivityLabel}
    scores = []
    for ls in labeled:
        counts[ls.receptivity] += 1
        if ls.pa_score is not None:
            scores.append(ls.pa_score)
    if pa_scale is not None:
        lo, hi = float(pa_scale[0]), float(pa_scale[1])
    elif scores:
        lo, hi = float(min(scores)), float(max(scores))
    else:
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + bin_width
    n_bins = max(1, int(np.ceil((hi - lo) / bin_width)))
    edges = lo + bin_width * np.arange(n_bins + 1)
    hist, _ = np.histogram(scores, bins=edges) if scores else (np.zeros(n_bins, dtype=int), edges)
    return {
        "counts": {lab.value: counts[lab] for lab in ReceptivityLabel},
        "pa_bin_edges": edges,
        "pa_histogram": hist,
    }


def labeled_to_frame(labeled) -> pd.DataFrame:
    """Rows for labels.csv: participant_id,segment_start,width,label,pa_score,source_event."""
    rows = []
    for ls in labeled:
        rows.append(
            {
                "participant_id": ls.segment.participant_id,
                "segment_start": ls.segment.start,
                "width": ls.segment.width_min,
                "label": ls.receptivity.value,
                "pa_score": ls.pa_score,
                "source_event": ls.source_event,
            }
        )
    return pd.DataFrame(
        rows,
        columns=["participant_id", "segment_start", "width", "label", "pa_score", "source_event"],
    )
