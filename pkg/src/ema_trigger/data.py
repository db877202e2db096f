"""Data model, cohort ingestion, windowing, and the semi-personalized
min-max normalization.

A cohort directory holds one sub-directory per participant:

    <cohort>/<participant_id>/sensors.csv   timestamp,channel,value
    <cohort>/<participant_id>/ema.csv       notification_ts,response_ts,pa_score
    <cohort>/<participant_id>/rr.csv        timestamp,rr_ms   (optional)

Timestamps are epoch seconds or ISO-8601 per the schema config. All
participant-local reasoning (study days, the segment grid) uses a fixed
per-participant UTC offset; there is no automatic timezone inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

ALLOWED_WIDTHS_MIN = (10, 15, 20, 30, 60)

# Prompts close after this long; also bounds the non-response labeling span.
RESPONSE_WINDOW_MIN = 60


class ValidationError(ValueError):
    """Malformed or rule-violating input data."""


@dataclass(frozen=True)
class SchemaConfig:
    """Cohort file schema: channel registry plus study-level constants."""

    channels: tuple[str, ...]
    pa_scale: tuple[float, float] = (5.0, 25.0)
    utc_offset_min: int = 0
    utc_offsets: dict = field(default_factory=dict)  # participant overrides
    segment_width_min: int = 30
    daily_prompt_count: int = 5
    timestamp_format: str = "epoch"  # "epoch" | "iso8601"
    has_rr: bool = False
    include_partial_segments: bool = True
    hrv_sleep_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "pa_scale", tuple(float(v) for v in self.pa_scale))
        if not self.channels:
            raise ValidationError("channel registry is empty")
        if self.pa_scale[0] >= self.pa_scale[1]:
            raise ValidationError("pa_scale must be (min, max) with min < max")
        if self.segment_width_min not in ALLOWED_WIDTHS_MIN:
            raise ValidationError(
                f"segment width {self.segment_width_min} not in {ALLOWED_WIDTHS_MIN}"
            )
        if self.timestamp_format not in ("epoch", "iso8601"):
            raise ValidationError(f"unknown timestamp_format {self.timestamp_format!r}")
        if self.daily_prompt_count < 1:
            raise ValidationError("daily_prompt_count must be >= 1")

    def offset_for(self, participant_id: str) -> int:
        return int(self.utc_offsets.get(participant_id, self.utc_offset_min))

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "pa_scale": list(self.pa_scale),
            "utc_offset_min": self.utc_offset_min,
            "utc_offsets": dict(self.utc_offsets),
            "segment_width_min": self.segment_width_min,
            "daily_prompt_count": self.daily_prompt_count,
            "timestamp_format": self.timestamp_format,
            "has_rr": self.has_rr,
            "include_partial_segments": self.include_partial_segments,
            "hrv_sleep_only": self.hrv_sleep_only,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        return cls(
            channels=tuple(d["channels"]),
            pa_scale=tuple(d.get("pa_scale", (5.0, 25.0))),
            utc_offset_min=int(d.get("utc_offset_min", 0)),
            utc_offsets={str(k): int(v) for k, v in (d.get("utc_offsets") or {}).items()},
            segment_width_min=int(d.get("segment_width_min", 30)),
            daily_prompt_count=int(d.get("daily_prompt_count", 5)),
            timestamp_format=d.get("timestamp_format", "epoch"),
            has_rr=bool(d.get("has_rr", False)),
            include_partial_segments=bool(d.get("include_partial_segments", True)),
            hrv_sleep_only=bool(d.get("hrv_sleep_only", False)),
        )

    @classmethod
    def from_yaml(cls, path) -> "SchemaConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_yaml(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


@dataclass(frozen=True)
class EmaEvent:
    """One prompt: notification time, optional response time and PA score."""

    notification_ts: int
    response_ts: int | None = None
    pa_score: float | None = None

    @property
    def answered(self) -> bool:
        return self.response_ts is not None


@dataclass(frozen=True)
class Segment:
    """One aligned sensor window on the participant-local grid."""

    participant_id: str
    start: int            # epoch seconds
    width_min: int
    study_day: int
    n_samples: int
    covered_fraction: float

    @property
    def end(self) -> int:
        return self.start + self.width_min * 60

    @property
    def empty(self) -> bool:
        return self.n_samples == 0

    @property
    def partial(self) -> bool:
        return self.covered_fraction < 1.0


@dataclass(eq=False)
class ParticipantDataset:
    """All streams for one participant, sorted and validated."""

    participant_id: str
    utc_offset_min: int
    sensors: dict          # channel -> (times int64 array, values float array)
    events: list           # EmaEvent, sorted by notification_ts
    rr: tuple | None = None  # (times int64 array, rr_ms float array)
    first_date: date | None = None

    @property
    def n_sensor_rows(self) -> int:
        return int(sum(t.size for t, _ in self.sensors.values()))

    @property
    def n_events(self) -> int:
        return len(self.events)

    def local_date_of(self, ts: int) -> date:
        return datetime.fromtimestamp(
            ts + self.utc_offset_min * 60, tz=timezone.utc
        ).date()

    def study_day_of(self, ts: int) -> int:
        """1-based day index; calendar gaps keep their distance."""
        if self.first_date is None:
            raise ValidationError(f"participant {self.participant_id} has no data")
        return (self.local_date_of(ts) - self.first_date).days + 1


@dataclass(eq=False)
class Cohort:
    schema: SchemaConfig
    participants: dict  # participant_id -> ParticipantDataset

    def __iter__(self):
        return iter(self.participants.values())

    def __len__(self):
        return len(self.participants)

    def row_counts(self) -> dict:
        return {
            pid: {"sensor_rows": p.n_sensor_rows, "events": p.n_events}
            for pid, p in self.participants.items()
        }


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_timestamps(raw: pd.Series, fmt: str, path, colname: str) -> pd.Series:
    """Float series of epoch seconds, NaN where the field is empty."""
    if fmt == "epoch":
        vals = pd.to_numeric(raw, errors="coerce")
    else:
        parsed = pd.to_datetime(raw, errors="coerce", utc=True)
        out = np.full(len(parsed), np.nan)
        ok = parsed.notna().to_numpy()
        if ok.any():
            out[ok] = parsed[ok].astype("int64").to_numpy() // 10**9
        vals = pd.Series(out, index=raw.index)
    bad = vals.isna() & raw.notna()
    if bad.any():
        line = int(bad.idxmax()) + 2  # header + 1-based
        raise ValidationError(f"{path}:{line}: bad {colname} value {raw[bad.idxmax()]!r}")
    return vals


def _read_sensors(path: Path, schema: SchemaConfig) -> dict:
    df = pd.read_csv(path, dtype={"channel": str})
    expected = ["timestamp", "channel", "value"]
    if list(df.columns) != expected:
        raise ValidationError(f"{path}: expected header {','.join(expected)}")
    if df.empty:
        return {}
    ts = _parse_timestamps(df["timestamp"], schema.timestamp_format, path, "timestamp")
    if ts.isna().any():
        line = int(ts.isna().idxmax()) + 2
        raise ValidationError(f"{path}:{line}: missing timestamp")
    values = pd.to_numeric(df["value"], errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        line = int(np.argmax(bad)) + 2
        raise ValidationError(f"{path}:{line}: non-finite value {df['value'].iloc[int(np.argmax(bad))]!r}")
    unknown = ~df["channel"].isin(schema.channels)
    if unknown.any():
        line = int(np.argmax(unknown.to_numpy())) + 2
        raise ValidationError(
            f"{path}:{line}: unknown channel {df['channel'].iloc[int(np.argmax(unknown.to_numpy()))]!r}; "
            f"registry: {', '.join(schema.channels)}"
        )
    streams = {}
    t_arr = ts.to_numpy(dtype=np.int64)
    v_arr = values.to_numpy(dtype=float)
    ch_arr = df["channel"].to_numpy()
    for ch in schema.channels:
        sel = ch_arr == ch
        if not sel.any():
            continue
        t = t_arr[sel]
        v = v_arr[sel]
        order = np.argsort(t, kind="stable")
        streams[ch] = (t[order], v[order])
    return streams


def _read_ema(path: Path, schema: SchemaConfig) -> list:
    df = pd.read_csv(path)
    expected = ["notification_ts", "response_ts", "pa_score"]
    if list(df.columns) != expected:
        raise ValidationError(f"{path}: expected header {','.join(expected)}")
    events = []
    if df.empty:
        return events
    notif = _parse_timestamps(df["notification_ts"], schema.timestamp_format, path, "notification_ts")
    resp = _parse_timestamps(df["response_ts"], schema.timestamp_format, path, "response_ts")
    pa = pd.to_numeric(df["pa_score"], errors="coerce")
    lo, hi = schema.pa_scale
    for i in range(len(df)):
        line = i + 2
        if pd.isna(notif.iloc[i]):
            raise ValidationError(f"{path}:{line}: missing notification_ts")
        n_ts = int(notif.iloc[i])
        if pd.isna(resp.iloc[i]):
            if not pd.isna(pa.iloc[i]):
                raise ValidationError(f"{path}:{line}: pa_score without response_ts")
            events.append(EmaEvent(n_ts))
            continue
        r_ts = int(resp.iloc[i])
        if r_ts < n_ts:
            raise ValidationError(f"{path}:{line}: response before notification")
        if r_ts > n_ts + RESPONSE_WINDOW_MIN * 60:
            raise ValidationError(
                f"{path}:{line}: response later than {RESPONSE_WINDOW_MIN} min after notification"
            )
        if pd.isna(pa.iloc[i]):
            raise ValidationError(f"{path}:{line}: response_ts without pa_score")
        score = float(pa.iloc[i])
        if not lo <= score <= hi:
            raise ValidationError(f"{path}:{line}: pa_score {score} outside scale [{lo}, {hi}]")
        events.append(EmaEvent(n_ts, r_ts, score))
    events.sort(key=lambda e: e.notification_ts)
    return events


def _read_rr(path: Path, schema: SchemaConfig):
    df = pd.read_csv(path)
    expected = ["timestamp", "rr_ms"]
    if list(df.columns) != expected:
        raise ValidationError(f"{path}: expected header {','.join(expected)}")
    if df.empty:
        return None
    ts = _parse_timestamps(df["timestamp"], schema.timestamp_format, path, "timestamp")
    if ts.isna().any():
        line = int(ts.isna().idxmax()) + 2
        raise ValidationError(f"{path}:{line}: missing timestamp")
    rr = pd.to_numeric(df["rr_ms"], errors="coerce")
    if rr.isna().any():
        line = int(rr.isna().idxmax()) + 2
        raise ValidationError(f"{path}:{line}: bad rr_ms value")
    t = ts.to_numpy(dtype=np.int64)
    v = rr.to_numpy(dtype=float)
    order = np.argsort(t, kind="stable")
    return t[order], v[order]


def _first_date(p: ParticipantDataset):
    stamps = []
    for t, _ in p.sensors.values():
        if t.size:
            stamps.append(int(t.min()))
    stamps.extend(e.notification_ts for e in p.events)
    if p.rr is not None and p.rr[0].size:
        stamps.append(int(p.rr[0].min()))
    if not stamps:
        return None
    return datetime.fromtimestamp(
        min(stamps) + p.utc_offset_min * 60, tz=timezone.utc
    ).date()


def load_participant(pdir: Path, schema: SchemaConfig) -> ParticipantDataset:
    pid = pdir.name
    sensors_path = pdir / "sensors.csv"
    ema_path = pdir / "ema.csv"
    if not sensors_path.exists() or not ema_path.exists():
        raise ValidationError(f"{pdir}: missing sensors.csv or ema.csv")
    p = ParticipantDataset(
        participant_id=pid,
        utc_offset_min=schema.offset_for(pid),
        sensors=_read_sensors(sensors_path, schema),
        events=_read_ema(ema_path, schema),
    )
    rr_path = pdir / "rr.csv"
    if rr_path.exists():
        p.rr = _read_rr(rr_path, schema)
    p.first_date = _first_date(p)

    # each study day may hold at most the configured prompt count
    per_day = {}
    for e in p.events:
        d = p.local_date_of(e.notification_ts)
        per_day[d] = per_day.get(d, 0) + 1
    for d, count in per_day.items():
        if count > schema.daily_prompt_count:
            raise ValidationError(
                f"{ema_path}: {count} prompts on {d}, limit {schema.daily_prompt_count}"
            )
    return p


def ingest(cohort_dir, schema: SchemaConfig) -> Cohort:
    """Load every participant sub-directory; sorted, validated, immutable."""
    cohort_dir = Path(cohort_dir)
    if not cohort_dir.is_dir():
        raise ValidationError(f"{cohort_dir}: not a directory")
    participants = {}
    for pdir in sorted(d for d in cohort_dir.iterdir() if d.is_dir()):
        participants[pdir.name] = load_participant(pdir, schema)
    if not participants:
        raise ValidationError(f"{cohort_dir}: no participant directories")
    return Cohort(schema=schema, participants=participants)


# ---------------------------------------------------------------------------
# Serialization (round-trips through ingest exactly)
# ---------------------------------------------------------------------------


def _format_ts(ts: int, fmt: str):
    if fmt == "epoch":
        return ts
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_participant(p: ParticipantDataset, pdir: Path, schema: SchemaConfig) -> None:
    pdir.mkdir(parents=True, exist_ok=True)
    fmt = schema.timestamp_format
    rows = []
    for ch in schema.channels:
        if ch not in p.sensors:
            continue
        t, v = p.sensors[ch]
        for i in range(t.size):
            rows.append((_format_ts(int(t[i]), fmt), ch, v[i]))
    pd.DataFrame(rows, columns=["timestamp", "channel", "value"]).to_csv(
        pdir / "sensors.csv", index=False
    )
    erows = []
    for e in p.events:
        erows.append(
            (
                _format_ts(e.notification_ts, fmt),
                _format_ts(e.response_ts, fmt) if e.answered else "",
                e.pa_score if e.pa_score is not None else "",
            )
        )
    pd.DataFrame(erows, columns=["notification_ts", "response_ts", "pa_score"]).to_csv(
        pdir / "ema.csv", index=False
    )
    if p.rr is not None:
        t, v = p.rr
        pd.DataFrame(
            {"timestamp": [_format_ts(int(x), fmt) for x in t], "rr_ms": v}
        ).to_csv(pdir / "rr.csv", index=False)


def write_cohort(cohort: Cohort, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for pid, p in sorted(cohort.participants.items()):
        write_participant(p, out_dir / pid, cohort.schema)


def cohorts_equal(a: Cohort, b: Cohort) -> bool:
    if sorted(a.participants) != sorted(b.participants):
        return False
    for pid, pa in a.participants.items():
        pb = b.participants[pid]
        if pa.events != pb.events or pa.utc_offset_min != pb.utc_offset_min:
            return False
        if sorted(pa.sensors) != sorted(pb.sensors):
            return False
        for ch, (t, v) in pa.sensors.items():
            t2, v2 = pb.sensors[ch]
            if not (np.array_equal(t, t2) and np.array_equal(v, v2)):
                return False
        if (pa.rr is None) != (pb.rr is None):
            return False
        if pa.rr is not None and not (
            np.array_equal(pa.rr[0], pb.rr[0]) and np.array_equal(pa.rr[1], pb.rr[1])
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------


def segment_windows(p: ParticipantDataset, width_min: int) -> list:
    """Aligned, non-overlapping windows covering the observed time range.

    The grid is anchored at participant-local midnight. Windows intersecting
    the observed span but not fully inside it carry covered_fraction < 1;
    windows holding zero sensor samples are flagged empty.
    """
    if width_min not in ALLOWED_WIDTHS_MIN:
        raise ValidationError(f"segment width {width_min} not in {ALLOWED_WIDTHS_MIN}")
    stamps = [t for t, _ in p.sensors.values() if t.size]
    lo_candidates = [int(t.min()) for t in stamps]
    hi_candidates = [int(t.max()) for t in stamps]
    for e in p.events:
        lo_candidates.append(e.notification_ts)
        hi_candidates.append(e.response_ts if e.answered else e.notification_ts)
    if not lo_candidates:
        return []
    lo, hi = min(lo_candidates), max(hi_candidates)

    off = p.utc_offset_min * 60
    w = width_min * 60
    k_lo = (lo + off) // w
    k_hi = (hi + off) // w

    all_times = (
        np.sort(np.concatenate(stamps)) if stamps else np.empty(0, dtype=np.int64)
    )
    segments = []
    for k in range(int(k_lo), int(k_hi) + 1):
        start = int(k * w - off)
        end = start + w
        n = int(
            np.searchsorted(all_times, end, side="left")
            - np.searchsorted(all_times, start, side="left")
        )
        covered = (min(hi, end) - max(lo, start)) / w
        segments.append(
            Segment(
                participant_id=p.participant_id,
                start=start,
                width_min=width_min,
                study_day=p.study_day_of(start),
                n_samples=n,
                covered_fraction=max(0.0, min(1.0, covered)),
            )
        )
    return segments


# ---------------------------------------------------------------------------
# Semi-personalized normalization
# ---------------------------------------------------------------------------


def normalize_semi_personalized(
    features: pd.DataFrame,
    test_participant: str,
    study_day: int,
    participant_col: str = "participant_id",
    day_col: str = "study_day",
):
    """Min-max scale every feature column using the mandated reference rows.

    Day 1 draws the per-feature (min, max) exclusively from other
    participants' rows; later days draw them from the test participant's
    earlier days (falling back to the day-1 rule when no earlier rows exist).
    Values are clipped to [0, 1]; a constant reference feature maps every
    value to 0.5; NaNs pass through. Returns (scaled copy, bounds frame with
    'min'/'max' rows).
    """
    if study_day < 1:
        raise ValidationError("study_day must be >= 1")
    meta_cols = [c for c in (participant_col, day_col) if c in features.columns]
    value_cols = [c for c in features.columns if c not in meta_cols]

    if study_day == 1:
        ref = features[features[participant_col] != test_participant]
    else:
        ref = features[
            (features[participant_col] == test_participant)
            & (features[day_col] < study_day)
        ]
        if ref.empty:
            ref = features[features[participant_col] != test_participant]
    if ref.empty:
        raise ValidationError(
            f"no reference rows for participant {test_participant!r} day {study_day}"
        )

    mins, maxs = {}, {}
    for col in value_cols:
        col_ref = ref[col].to_numpy(dtype=float)
        if np.all(np.isnan(col_ref)):
            raise ValidationError(f"feature {col!r} absent from reference data")
        mins[col] = float(np.nanmin(col_ref))
        maxs[col] = float(np.nanmax(col_ref))

    out = features.copy()
    for col in value_cols:
        lo, hi = mins[col], maxs[col]
        vals = out[col].to_numpy(dtype=float)
        if hi == lo:
            scaled = np.where(np.isnan(vals), np.nan, 0.5)
        else:
            scaled = np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
        out[col] = scaled
    bounds = pd.DataFrame({c: [mins[c], maxs[c]] for c in value_cols}, index=["min", "max"])
    return out, bounds
