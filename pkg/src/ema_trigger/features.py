"""Per-segment feature extraction.

Covers the statistical channel features, RR-interval validation and HRV,
sleep regularity/efficiency, phone-log aggregates, and location clustering.
Reserved channel names route to the dedicated extractors:

    sleep_state                      per-minute 0=awake 1=asleep 2=out-of-bed
    call_in / call_out               value = call duration in seconds
    call_missed                      value ignored
    sms_in / sms_out                 value ignored
    screen                           value 1=unlock(on) 0=lock(off)
    loc_lat / loc_lon                paired by timestamp

Every other registry channel contributes the plain statistics. Masked values
are NaN; features.csv writes them as empty cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import interpolate, signal

from .data import Cohort, ParticipantDataset, segment_windows

STAT_NAMES = (
    "mean", "median", "max", "min", "std", "p75", "p25",
    "iqr", "rms", "kurtosis", "skew", "zero_cross",
)

RESERVED_CHANNELS = frozenset(
    ["sleep_state", "call_in", "call_out", "call_missed", "sms_in", "sms_out",
     "screen", "loc_lat", "loc_lon"]
)

PHONE_FEATURES = (
    "phone_calls_in", "phone_calls_out", "phone_calls_missed",
    "phone_sms_in", "phone_sms_out", "phone_call_minutes", "phone_screen_min",
)

SLEEP_FEATURES = ("sleep_time_in_bed", "sleep_time_asleep", "sleep_efficiency", "sleep_sri")

LOCATION_FEATURES = ("loc_cluster", "loc_at_home")

HRV_TIME_FEATURES = (
    "hrv_mean_nni", "hrv_rmssd", "hrv_sdnn", "hrv_nni50", "hrv_pnni50",
    "hrv_nni20", "hrv_pnni20", "hrv_cvsd", "hrv_cvnni",
)
HRV_FREQ_FEATURES = ("hrv_vlf", "hrv_lf", "hrv_hf", "hrv_hf_lf_ratio")

# sleep-state codes
AWAKE, ASLEEP, OUT_OF_BED = 0, 1, 2

RR_RANGE_MS = (250.0, 3000.0)
HRV_MIN_FREQ_BEATS = 64
TACHOGRAM_HZ = 4.0
FREQ_BANDS = {"vlf": (0.003, 0.04), "lf": (0.04, 0.15), "hf": (0.15, 0.40)}


# ---------------------------------------------------------------------------
# Statistical channel features
# ---------------------------------------------------------------------------


def stat_features(values) -> dict:
    """The 12 channel statistics for one segment; all NaN when empty.

    std uses the population convention (ddof=0); skew and kurtosis are the
    standardized third/fourth moments (kurtosis is excess), masked when the
    variance is zero. zero_cross counts sign changes of (x - mean) scanning
    in time order, zeros counted as positive side.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {name: np.nan for name in STAT_NAMES}
    mean = float(v.mean())
    m2 = float(np.mean((v - mean) ** 2))
    std = np.sqrt(m2)
    if m2 > 0:
        skew = float(np.mean((v - mean) ** 3)) / m2**1.5
        kurt = float(np.mean((v - mean) ** 4)) / m2**2 - 3.0
    else:
        skew = np.nan
        kurt = np.nan
    sides = (v - mean) >= 0
    return {
        "mean": mean,
        "median": float(np.median(v)),
        "max": float(v.max()),
        "min": float(v.min()),
        "std": float(std),
        "p75": float(np.percentile(v, 75)),
        "p25": float(np.percentile(v, 25)),
        "iqr": float(np.percentile(v, 75) - np.percentile(v, 25)),
        "rms": float(np.sqrt(np.mean(v**2))),
        "kurtosis": kurt,
        "skew": skew,
        "zero_cross": float(np.count_nonzero(sides[1:] != sides[:-1])),
    }


def stat_features_matrix(matrix: np.ndarray) -> dict:
    """Vectorized stat_features over rows of a (segments x samples) matrix."""
    m = np.asarray(matrix, dtype=float)
    mean = m.mean(axis=1)
    centered = m - mean[:, None]
    m2 = np.mean(centered**2, axis=1)
    std = np.sqrt(m2)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(m2 > 0, np.mean(centered**3, axis=1) / m2**1.5, np.nan)
        kurt = np.where(m2 > 0, np.mean(centered**4, axis=1) / m2**2 - 3.0, np.nan)
    p75 = np.percentile(m, 75, axis=1)
    p25 = np.percentile(m, 25, axis=1)
    sides = centered >= 0
    return {
        "mean": mean,
        "median": np.median(m, axis=1),
        "max": m.max(axis=1),
        "min": m.min(axis=1),
        "std": std,
        "p75": p75,
        "p25": p25,
        "iqr": p75 - p25,
        "rms": np.sqrt(np.mean(m**2, axis=1)),
        "kurtosis": kurt,
        "skew": skew,
        "zero_cross": (sides[:, 1:] != sides[:, :-1]).sum(axis=1).astype(float),
    }


# ---------------------------------------------------------------------------
# RR validation (criterion beat difference) and HRV
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CbdParams:
    """Constants of the criterion-beat-difference artifact rule."""

    med_coef: float = 3.32     # maximum expected difference = coef * QD
    mad_center_coef: float = 2.9
    mad_divisor: float = 3.0   # minimal artifact difference = (median - c*QD)/d
    reference_window: int = 5  # running reference = median of last N kept beats


def _cbd_threshold(rr: np.ndarray, params: CbdParams) -> float:
    qd = (np.percentile(rr, 75) - np.percentile(rr, 25)) / 2.0
    med = params.med_coef * qd
    mad = (np.median(rr) - params.mad_center_coef * qd) / params.mad_divisor
    return (med + mad) / 2.0


def _cbd_pass(times, rr, params):
    cbd = _cbd_threshold(rr, params)
    keep = np.zeros(rr.size, dtype=bool)
    recent = []
    for i in range(rr.size):
        if not recent:
            keep[i] = True
            recent.append(rr[i])
            continue
        ref = float(np.median(recent))
        if abs(rr[i] - ref) <= cbd:
            keep[i] = True
            recent.append(rr[i])
            if len(recent) > params.reference_window:
                recent.pop(0)
    return times[keep], rr[keep]


def validate_rr(times, rr_ms, params: CbdParams = CbdParams(), max_rounds: int = 10):
    """Remove implausible beats; iterated to a fixed point so the operation
    is idempotent.

    Beats outside the physiologic range are dropped first, then any beat
    deviating from the running plausible-beat estimate (median of the last
    few kept beats) by more than the criterion beat difference is removed.
    Raises if nothing survives.
    """
    times = np.asarray(times, dtype=np.int64)
    rr = np.asarray(rr_ms, dtype=float)
    if rr.size == 0:
        raise ValueError("no valid RR: empty series")
    in_range = (rr > RR_RANGE_MS[0]) & (rr < RR_RANGE_MS[1])
    times, rr = times[in_range], rr[in_range]
    for _ in range(max_rounds):
        if rr.size == 0:
            break
        new_times, new_rr = _cbd_pass(times, rr, params)
        if new_rr.size == rr.size:
            break
        times, rr = new_times, new_rr
    if rr.size == 0:
        raise ValueError("no valid RR: every beat rejected")
    return times, rr


def hrv_features(rr_ms) -> dict:
    """Time-domain and frequency-domain HRV from validated RR intervals.

    Time-domain needs >= 2 beats, frequency-domain >= 64 (else those entries
    are masked). NNI50/NNI20 count successive differences strictly greater
    than 50/20 ms; PNNI* are percentages over the n-1 differences. Band
    powers integrate the periodogram of the 4 Hz cubic-interpolated tachogram.
    """
    rr = np.asarray(rr_ms, dtype=float)
    out = {name: np.nan for name in HRV_TIME_FEATURES + HRV_FREQ_FEATURES}
    if rr.size >= 2:
        diffs = np.diff(rr)
        mean_nni = float(rr.mean())
        rmssd = float(np.sqrt(np.mean(diffs**2)))
        sdnn = float(rr.std(ddof=1))
        nni50 = int(np.count_nonzero(np.abs(diffs) > 50.0))
        nni20 = int(np.count_nonzero(np.abs(diffs) > 20.0))
        out.update(
            hrv_mean_nni=mean_nni,
            hrv_rmssd=rmssd,
            hrv_sdnn=sdnn,
            hrv_nni50=float(nni50),
            hrv_pnni50=100.0 * nni50 / diffs.size,
            hrv_nni20=float(nni20),
            hrv_pnni20=100.0 * nni20 / diffs.size,
            hrv_cvsd=rmssd / mean_nni if mean_nni else np.nan,
            hrv_cvnni=sdnn / mean_nni if mean_nni else np.nan,
        )
    if rr.size >= HRV_MIN_FREQ_BEATS:
        t = np.cumsum(rr) / 1000.0
        t -= t[0]
        grid = np.arange(0.0, t[-1], 1.0 / TACHOGRAM_HZ)
        tacho = interpolate.interp1d(t, rr, kind="cubic")(grid)
        freqs, psd = signal.periodogram(tacho, fs=TACHOGRAM_HZ, detrend="constant")
        powers = {}
        for band, (lo, hi) in FREQ_BANDS.items():
            sel = (freqs >= lo) & (freqs < hi)
            powers[band] = float(np.trapezoid(psd[sel], freqs[sel])) if sel.sum() > 1 else 0.0
        out.update(
            hrv_vlf=powers["vlf"],
            hrv_lf=powers["lf"],
            hrv_hf=powers["hf"],
            hrv_hf_lf_ratio=powers["hf"] / powers["lf"] if powers["lf"] > 0 else np.nan,
        )
    return out


# ---------------------------------------------------------------------------
# Sleep metrics
# ---------------------------------------------------------------------------


def sleep_regularity_index(day_states) -> float:
    """SRI = 200 * (minute-wise sleep/wake agreement at lag 24 h) - 100.

    `day_states` is a sequence of >= 2 consecutive per-minute state vectors of
    equal length; any state other than ASLEEP counts as wake. Chance-level
    agreement maps to 0, perfect regularity to 100.
    """
    days = [np.asarray(d) == ASLEEP for d in day_states]
    if len(days) < 2:
        return float("nan")
    if len({d.size for d in days}) != 1:
        raise ValueError("per-day state vectors must share a length")
    agree = [np.mean(a == b) for a, b in zip(days[:-1], days[1:])]
    return float(200.0 * np.mean(agree) - 100.0)


def sleep_efficiency(states) -> float:
    """Percent of in-bed time spent asleep, up to the final awakening.

    The denominator is in-bed minutes before the end of the last asleep run
    (the final awakening); trailing awake or out-of-bed minutes do not count
    against efficiency. A record with no sleep at all scores 0; a record with
    no in-bed time is masked.
    """
    s = np.asarray(states)
    in_bed = s != OUT_OF_BED
    if not in_bed.any():
        return float("nan")
    asleep_idx = np.flatnonzero(s == ASLEEP)
    if asleep_idx.size == 0:
        return 0.0
    final_awakening = asleep_idx[-1] + 1
    denom = int(in_bed[:final_awakening].sum())
    if denom == 0:
        return float("nan")
    return 100.0 * asleep_idx.size / denom


# ---------------------------------------------------------------------------
# Phone-log aggregates
# ---------------------------------------------------------------------------


def _count_in(times, lo, hi):
    return int(np.searchsorted(times, hi, side="left") - np.searchsorted(times, lo, side="left"))


def phone_features(streams: dict, seg_start: int, seg_end: int) -> dict:
    """Counts, call minutes, and screen-on minutes inside one segment.

    `streams` maps reserved phone channel names to (times, values). Screen-on
    time comes from the lock/unlock transition log; an interval open at a
    segment edge is clipped to that edge (covers unlock-before-segment and
    lock-after-segment).
    """
    out = dict.fromkeys(PHONE_FEATURES, 0.0)
    for ch, key in (("call_in", "phone_calls_in"), ("call_out", "phone_calls_out"),
                    ("call_missed", "phone_calls_missed"), ("sms_in", "phone_sms_in"),
                    ("sms_out", "phone_sms_out")):
        if ch in streams:
            out[key] = float(_count_in(streams[ch][0], seg_start, seg_end))
    duration = 0.0
    for ch in ("call_in", "call_out"):
        if ch in streams:
            t, v = streams[ch]
            i0 = np.searchsorted(t, seg_start, side="left")
            i1 = np.searchsorted(t, seg_end, side="left")
            duration += float(np.sum(v[i0:i1]))
    out["phone_call_minutes"] = duration / 60.0

    if "screen" in streams:
        t, v = streams["screen"]
        i0 = np.searchsorted(t, seg_start, side="left")
        i1 = np.searchsorted(t, seg_end, side="left")
        # state at segment start from the last transition before it
        state_on = bool(v[i0 - 1] > 0.5) if i0 > 0 else None
        cursor = seg_start
        on_seconds = 0.0
        for j in range(i0, i1):
            if v[j] > 0.5:  # unlock
                if state_on is None:
                    state_on = False
                if not state_on:
                    state_on = True
                    cursor = int(t[j])
            else:  # lock
                if state_on is None:
                    # unmatched lock: screen was on since (at least) segment start
                    on_seconds += t[j] - seg_start
                elif state_on:
                    on_seconds += t[j] - cursor
                state_on = False
        if state_on:
            on_seconds += seg_end - cursor
        out["phone_screen_min"] = on_seconds / 60.0
    return out


# ---------------------------------------------------------------------------
# Location clustering
# ---------------------------------------------------------------------------


def remove_location_outliers(points: np.ndarray) -> np.ndarray:
    """IQR rule per coordinate: keep points within 1.5*IQR of the quartiles."""
    pts = np.asarray(points, dtype=float)
    keep = np.ones(pts.shape[0], dtype=bool)
    for j in range(pts.shape[1]):
        q1, q3 = np.percentile(pts[:, j], [25, 75])
        iqr = q3 - q1
        keep &= (pts[:, j] >= q1 - 1.5 * iqr) & (pts[:, j] <= q3 + 1.5 * iqr)
    return keep


def _farthest_point_init(pts, k, rng):
    centers = [pts[rng.integers(pts.shape[0])]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((pts - c) ** 2, axis=1) for c in centers], axis=0
        )
        centers.append(pts[int(np.argmax(d2))])
    return np.array(centers)


def _lloyd(pts, centers, max_iter=100):
    inertia_prev = np.inf
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(pts.shape[0]), assign].sum())
        if inertia > inertia_prev + 1e-12:  # objective must not increase
            raise AssertionError("k-means objective increased")
        new_centers = centers.copy()
        for c in range(centers.shape[0]):
            sel = assign == c
            if sel.any():
                new_centers[c] = pts[sel].mean(axis=0)
        if np.allclose(new_centers, centers):
            break
        centers = new_centers
        inertia_prev = inertia
    return assign, centers, inertia


def silhouette_score(pts, assign) -> float:
    """Mean silhouette over points; singleton clusters contribute 0."""
    n = pts.shape[0]
    labels = np.unique(assign)
    if labels.size < 2:
        return -1.0
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    scores = np.zeros(n)
    for i in range(n):
        own = assign == assign[i]
        n_own = own.sum()
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = d[i][own].sum() / (n_own - 1)
        b = min(d[i][assign == lab].mean() for lab in labels if lab != assign[i])
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


@dataclass
class LocationClustering:
    assignments: np.ndarray     # cluster id per (kept) input point, -1 for outliers
    k: int
    silhouette: float
    centers: np.ndarray
    home_cluster: int           # always 0 after relabeling by size


def cluster_locations(points, k_min: int = 6, k_max: int = 10, seed: int = 0,
                      n_restarts: int = 50):
    """k-means over location points; k chosen by mean silhouette in
    [k_min, k_max] with the paper's constraint that k exceeds five.

    Outliers are removed by the IQR rule first. The most populated cluster is
    home and is relabeled 0 (clusters sorted by descending size). Returns
    None when fewer than k_min + 1 distinct points remain ("unknown").
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        return None
    keep = remove_location_outliers(pts)
    kept = pts[keep]
    distinct = np.unique(kept, axis=0)
    if distinct.shape[0] < k_min + 1:
        return None

    best = None  # (silhouette, -k) maximized; ties prefer smaller k
    k_cap = min(k_max, distinct.shape[0])
    for k in range(k_min, k_cap + 1):
        best_inertia = np.inf
        best_assign = None
        for r in range(n_restarts):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k, r)))
            centers = _farthest_point_init(kept, k, rng)
            assign, centers, inertia = _lloyd(kept, centers)
            if inertia < best_inertia:
                best_inertia = inertia
                best_assign = assign
                best_centers = centers
        score = silhouette_score(kept, best_assign)
        if best is None or (score, -k) > (best[0], -best[1]):
            best = (score, k, best_assign, best_centers)

    score, k, assign, centers = best
    order = np.argsort(-np.bincount(assign, minlength=k), kind="stable")
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    full_assign = np.full(pts.shape[0], -1)
    full_assign[keep] = relabel[assign]
    return LocationClustering(
        assignments=full_assign,
        k=k,
        silhouette=score,
        centers=centers[order],
        home_cluster=0,
    )


# ---------------------------------------------------------------------------
# Cohort-level assembly
# ---------------------------------------------------------------------------


def feature_registry(schema) -> tuple:
    """Ordered feature-column names implied by the channel registry."""
    names = []
    plain = [ch for ch in schema.channels if ch not in RESERVED_CHANNELS]
    for ch in plain:
        names.extend(f"{ch}_{stat}" for stat in STAT_NAMES)
    present = set(schema.channels)
    if present & {"call_in", "call_out", "call_missed", "sms_in", "sms_out", "screen"}:
        names.extend(PHONE_FEATURES)
    if "sleep_state" in present:
        names.extend(SLEEP_FEATURES)
    if {"loc_lat", "loc_lon"} <= present:
        names.extend(LOCATION_FEATURES)
    if schema.has_rr:
        names.extend(HRV_TIME_FEATURES)
        names.extend(HRV_FREQ_FEATURES)
    return tuple(names)


def _sleep_day_features(p: ParticipantDataset):
    """Per study-day sleep metrics from the sleep_state channel.

    A night is the block of sleep_state samples whose local date precedes the
    day they annotate; metrics attach to the following day's segments. SRI
    needs the previous night too.
    """
    if "sleep_state" not in p.sensors:
        return {}
    t, v = p.sensors["sleep_state"]
    if t.size == 0:
        return {}
    dates = {}
    for ts, state in zip(t, v):
        dates.setdefault(p.local_date_of(int(ts)), []).append((int(ts), int(state)))
    per_day = {}
    nights = sorted(dates)
    vectors = {}
    for d in nights:
        rows = sorted(dates[d])
        vectors[d] = np.array([s for _, s in rows])
    for i, d in enumerate(nights):
        states = vectors[d]
        in_bed = states != OUT_OF_BED
        feats = {
            "sleep_time_in_bed": float(in_bed.sum()),
            "sleep_time_asleep": float((states == ASLEEP).sum()),
            "sleep_efficiency": sleep_efficiency(states),
            "sleep_sri": np.nan,
        }
        if i > 0 and vectors[nights[i - 1]].size == states.size:
            feats["sleep_sri"] = sleep_regularity_index([vectors[nights[i - 1]], states])
        night_start = min(ts for ts, _ in dates[d])
        per_day[p.study_day_of(night_start) + 1] = feats  # annotates the next day
    return per_day


def participant_features(p: ParticipantDataset, schema, segments=None) -> pd.DataFrame:
    """Feature rows for every window of one participant."""
    if segments is None:
        segments = segment_windows(p, schema.segment_width_min)
    registry = feature_registry(schema)
    n = len(segments)
    cols = {name: np.full(n, np.nan) for name in registry}
    if n == 0:
        frame = pd.DataFrame(cols)
        frame.insert(0, "segment_start", np.array([], dtype=np.int64))
        frame.insert(0, "study_day", np.array([], dtype=int))
        frame.insert(0, "participant_id", np.array([], dtype=object))
        return frame

    starts = np.array([s.start for s in segments], dtype=np.int64)
    ends = starts + schema.segment_width_min * 60

    plain = [ch for ch in schema.channels if ch not in RESERVED_CHANNELS]
    for ch in plain:
        if ch not in p.sensors:
            continue
        t, v = p.sensors[ch]
        i0 = np.searchsorted(t, starts, side="left")
        i1 = np.searchsorted(t, ends, side="left")
        lengths = i1 - i0
        uniform = lengths.max() == lengths.min() if n else False
        if uniform and lengths.max() > 0:
            width = int(lengths.max())
            matrix = v[(i0[:, None] + np.arange(width)[None, :])]
            stats = stat_features_matrix(matrix)
            for stat in STAT_NAMES:
                cols[f"{ch}_{stat}"] = stats[stat]
        else:
            for state_i in range(n):
                if lengths[state_i] == 0:
                    continue
                st = stat_features(v[i0[state_i] : i1[state_i]])
                for stat in STAT_NAMES:
                    cols[f"{ch}_{stat}"][state_i] = st[stat]

    phone_channels = {ch: p.sensors[ch] for ch in
                      ("call_in", "call_out", "call_missed", "sms_in", "sms_out", "screen")
                      if ch in p.sensors}
    if set(schema.channels) & {"call_in", "call_out", "call_missed", "sms_in",
                               "sms_out", "screen"}:
        for i in range(n):
            ph = phone_features(phone_channels, int(starts[i]), int(ends[i]))
            for name in PHONE_FEATURES:
                cols[name][i] = ph[name]

    if "sleep_state" in schema.channels:
        per_day = _sleep_day_features(p)
        for i, seg in enumerate(segments):
            feats = per_day.get(seg.study_day)
            if feats:
                for name in SLEEP_FEATURES:
                    cols[name][i] = feats[name]

    if {"loc_lat", "loc_lon"} <= set(schema.channels) and \
            "loc_lat" in p.sensors and "loc_lon" in p.sensors:
        t_lat, lat = p.sensors["loc_lat"]
        t_lon, lon = p.sensors["loc_lon"]
        common, ia, ib = np.intersect1d(t_lat, t_lon, return_indices=True)
        points = np.column_stack([lat[ia], lon[ib]])
        clustering = cluster_locations(points, seed=0)
        if clustering is not None:
            i0 = np.searchsorted(common, starts, side="left")
            i1 = np.searchsorted(common, ends, side="left")
            for i in range(n):
                labs = clustering.assignments[i0[i] : i1[i]]
                labs = labs[labs >= 0]
                if labs.size:
                    modal = int(np.bincount(labs).argmax())
                    cols["loc_cluster"][i] = float(modal)
                    cols["loc_at_home"][i] = float(modal == clustering.home_cluster)

    if schema.has_rr and p.rr is not None:
        rt, rv = p.rr
        sleep_ok = np.ones(n, dtype=bool)
        if schema.hrv_sleep_only and "sleep_state" in p.sensors:
            st_t, st_v = p.sensors["sleep_state"]
            asleep_t = st_t[st_v == ASLEEP]
            i0 = np.searchsorted(asleep_t, starts, side="left")
            i1 = np.searchsorted(asleep_t, ends, side="left")
            sleep_ok = (i1 - i0) > 0
        i0 = np.searchsorted(rt, starts, side="left")
        i1 = np.searchsorted(rt, ends, side="left")
        for i in range(n):
            if not sleep_ok[i] or i1[i] - i0[i] < 2:
                continue
            try:
                _, clean = validate_rr(rt[i0[i] : i1[i]], rv[i0[i] : i1[i]])
            except ValueError:
                continue
            hv = hrv_features(clean)
            for name in HRV_TIME_FEATURES + HRV_FREQ_FEATURES:
                cols[name][i] = hv[name]

    frame = pd.DataFrame(cols, columns=list(registry))
    frame.insert(0, "segment_start", starts)
    frame.insert(0, "study_day", [s.study_day for s in segments])
    frame.insert(0, "participant_id", p.participant_id)
    return frame


def compute_features(cohort: Cohort, segments_by_pid=None) -> pd.DataFrame:
    """Feature table for every participant, in participant order."""
    frames = []
    for pid in sorted(cohort.participants):
        p = cohort.participants[pid]
        segs = segments_by_pid.get(pid) if segments_by_pid else None
        frames.append(participant_features(p, cohort.schema, segs))
    return pd.concat(frames, ignore_index=True)
