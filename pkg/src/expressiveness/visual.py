"""Visual behavioral signals from face-tracking output.

Takes per-frame face-tracking CSVs (30 fps, OpenFace 2.0 column naming),
averages them over five-frame windows down to 6 Hz, removes head motion
from the landmark channel by per-interval affine alignment to a shared
reference face, and reduces each participant's track to 20 summary
signals: action-unit activity plus displacement/velocity/acceleration of
landmarks, head translation, head rotation angles, and gaze angle.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, replace

import numpy as np

from .core import FeatureTable
from .errors import (
    DegenerateConfigurationError,
    EmptyInputError,
    MissingColumnError,
    NonFiniteValueError,
    ParseError,
    TooShortError,
)

# 30 fps input averaged over 5-frame windows.
DEFAULT_WINDOW = 5
DEFAULT_RATE_HZ = 6.0
N_LANDMARKS = 68

VISUAL_SIGNAL_NAMES = (
    "Mean Number of Action Units",
    "Mean Action Unit Intensity",
    "Mean Landmark Displacement",
    "Mean Landmark Velocity",
    "Mean Landmark Acceleration",
    "Head Translation Displacement",
    "Head Translation Velocity",
    "Head Translation Acceleration",
    "Head Pitch Displacement",
    "Head Pitch Velocity",
    "Head Pitch Acceleration",
    "Head Yaw Displacement",
    "Head Yaw Velocity",
    "Head Yaw Acceleration",
    "Head Roll Displacement",
    "Head Roll Velocity",
    "Head Roll Acceleration",
    "Gaze Angle Displacement",
    "Gaze Angle Velocity",
    "Gaze Angle Acceleration",
)


def _validate_channels(track) -> None:
    n = track.timestamps.shape[0]
    if n < 1:
        raise ValueError("track must contain at least one record")
    if np.any(np.diff(track.timestamps) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    shapes = {
        "au_presence": (n, track.au_presence.shape[1]),
        "au_intensity": (n, track.au_intensity.shape[1]),
        "landmarks": (n, N_LANDMARKS, 2),
        "translation": (n, 3),
        "rotation": (n, 3),
        "gaze": (n, 2),
        "success": (n,),
    }
    for name, want in shapes.items():
        arr = getattr(track, name)
        if arr.shape != want:
            raise ValueError(f"{name} must have shape {want}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError(f"{name} contains non-finite values")


def _freeze_arrays(track, names) -> None:
    for name in names:
        arr = np.asarray(getattr(track, name), dtype=float)
        arr.setflags(write=False)
        object.__setattr__(track, name, arr)


_CHANNELS = ("timestamps", "au_presence", "au_intensity", "landmarks",
             "translation", "rotation", "gaze", "success")


@dataclass(frozen=True, eq=False)
class FrameTrack:
    """Per-frame tracking record at the camera's native rate (~30 fps).

    landmarks has shape (n, 68, 2) in pixels; translation is (n, 3) in mm;
    rotation is (n, 3) holding pitch, yaw, roll in radians; gaze is (n, 2)
    in radians. au_presence holds binary occurrence flags, au_intensity
    values on the 0-5 scale. success marks frames where the tracker
    reported a valid fit; untracked frames are retained.
    """

    timestamps: np.ndarray
    au_presence: np.ndarray
    au_intensity: np.ndarray
    landmarks: np.ndarray
    translation: np.ndarray
    rotation: np.ndarray
    gaze: np.ndarray
    success: np.ndarray

    def __post_init__(self):
        _freeze_arrays(self, _CHANNELS)
        _validate_channels(self)
        bad = ~np.isin(self.au_presence, (0.0, 1.0))
        if np.any(bad):
            raise ValueError("au_presence flags must be 0 or 1")

    @property
    def n_frames(self) -> int:
        return self.timestamps.shape[0]


@dataclass(frozen=True, eq=False)
class IntervalTrack:
    """Window-averaged track at the reduced rate (6 Hz for 5-frame windows).

    Channels match FrameTrack; presence flags and the success channel
    become within-window fractions.
    """

    timestamps: np.ndarray
    au_presence: np.ndarray
    au_intensity: np.ndarray
    landmarks: np.ndarray
    translation: np.ndarray
    rotation: np.ndarray
    gaze: np.ndarray
    success: np.ndarray

    def __post_init__(self):
        _freeze_arrays(self, _CHANNELS)
        _validate_channels(self)

    @property
    def n_intervals(self) -> int:
        return self.timestamps.shape[0]


_AU_COL = re.compile(r"^AU(\d+)_([rc])$")

_SCALAR_COLS = ("timestamp", "success", "pose_Tx", "pose_Ty", "pose_Tz",
                "pose_Rx", "pose_Ry", "pose_Rz", "gaze_angle_x",
                "gaze_angle_y")


def parse_track(csv_path) -> FrameTrack:
    """Read one participant's tracking CSV (OpenFace 2.0 column names).

    Consumes timestamp, success, the 68 x/y landmark columns, pose
    translation and rotation, gaze angles, and every AUnn_r / AUnn_c
    column present; other columns are ignored. Untracked frames
    (success = 0) are kept.
    """
    path = str(csv_path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path=path) from None
        header = [h.strip() for h in raw_header]
        index = {name: i for i, name in enumerate(header)}

        landmark_cols = [f"x_{k}" for k in range(N_LANDMARKS)]
        landmark_cols += [f"y_{k}" for k in range(N_LANDMARKS)]
        for col in (*_SCALAR_COLS, *landmark_cols):
            if col not in index:
                raise MissingColumnError(col, path)

        au_r, au_c = {}, {}
        for name in header:
            m = _AU_COL.match(name)
            if m:
                target = au_r if m.group(2) == "r" else au_c
                target[int(m.group(1))] = index[name]
        if not au_r:
            raise MissingColumnError("AU*_r", path)
        if not au_c:
            raise MissingColumnError("AU*_c", path)
        r_cols = [au_r[k] for k in sorted(au_r)]
        c_cols = [au_c[k] for k in sorted(au_c)]

        consumed = [index[c] for c in _SCALAR_COLS]
        consumed += [index[c] for c in landmark_cols]
        consumed += r_cols + c_cols
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}",
                    path=path, line=lineno,
                )
            try:
                rows.append([float(row[i]) for i in consumed])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from None

    if not rows:
        raise ParseError("no data rows", path=path)
    data = np.asarray(rows, dtype=float)
    ns = len(_SCALAR_COLS)
    xs = data[:, ns:ns + N_LANDMARKS]
    ys = data[:, ns + N_LANDMARKS:ns + 2 * N_LANDMARKS]
    au_start = ns + 2 * N_LANDMARKS
    intensity = data[:, au_start:au_start + len(r_cols)]
    presence = data[:, au_start + len(r_cols):]
    try:
        return FrameTrack(
            timestamps=data[:, 0],
            au_presence=presence,
            au_intensity=intensity,
            landmarks=np.stack([xs, ys], axis=2),
            translation=data[:, 2:5],
            rotation=data[:, 5:8],
            gaze=data[:, 8:10],
            success=data[:, 1],
        )
    except (ValueError, NonFiniteValueError) as exc:
        raise ParseError(str(exc), path=path) from exc


def drop_untracked(track: FrameTrack) -> FrameTrack:
    """Remove frames whose tracking-success flag is 0."""
    keep = track.success != 0
    if not np.any(keep):
        raise TooShortError("no successfully tracked frames remain")
    return FrameTrack(**{name: getattr(track, name)[keep] for name in _CHANNELS})


def downsample(track: FrameTrack, window: int = DEFAULT_WINDOW) -> IntervalTrack:
    """Average non-overlapping frame windows; trailing remainder dropped."""
    if window < 1:
        raise ValueError("window must be >= 1")
    n = track.n_frames
    if n < window:
        raise TooShortError(f"need at least {window} frames, got {n}")
    m = n // window
    out = {}
    for name in _CHANNELS:
        arr = getattr(track, name)[: m * window]
        out[name] = arr.reshape((m, window) + arr.shape[1:]).mean(axis=1)
    return IntervalTrack(**out)


def reference_face(tracks) -> np.ndarray:
    """Mean landmark configuration over every interval of every track."""
    tracks = list(tracks)
    if not tracks:
        raise EmptyInputError("need at least one track")
    stacked = np.concatenate([t.landmarks for t in tracks], axis=0)
    return stacked.mean(axis=0)


def align_landmarks(track: IntervalTrack, reference) -> IntervalTrack:
    """Project each interval's landmarks onto the reference face.

    Per interval, the 6-parameter 2-D affine map minimizing least-squares
    distance from the interval's 68 points to the reference is estimated
    and applied. Non-landmark channels pass through unchanged.
    """
    ref = np.asarray(reference, dtype=float)
    if ref.shape != (N_LANDMARKS, 2):
        raise ValueError(f"reference must have shape ({N_LANDMARKS}, 2)")
    pts = track.landmarks
    m = pts.shape[0]
    design = np.concatenate([pts, np.ones((m, N_LANDMARKS, 1))], axis=2)
    gram = np.einsum("mki,mkj->mij", design, design)
    sv = np.linalg.svd(gram, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-10 * sv[:, 0]):
        raise DegenerateConfigurationError(
            "landmark configuration is degenerate (collinear or collapsed)"
        )
    rhs = np.einsum("mki,kj->mij", design, ref)
    coefs = np.linalg.solve(gram, rhs)  # (m, 3, 2) affine parameters
    aligned = np.einsum("mki,mij->mkj", design, coefs)
    return replace(track, landmarks=aligned)


def kinematics(series, rate: float = DEFAULT_RATE_HZ):
    """Mean step displacement, speed, and acceleration magnitude.

    Accepts a scalar series (n,) or a point series (n, d); magnitudes are
    Euclidean. Velocity is the step difference times the sampling rate,
    acceleration the velocity difference times the rate.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 3:
        raise TooShortError(f"need at least 3 samples, got {x.shape[0]}")
    steps = np.diff(x, axis=0)
    disp = np.linalg.norm(steps, axis=1)
    accel = np.linalg.norm(np.diff(steps * rate, axis=0) * rate, axis=1)
    return float(disp.mean()), float(disp.mean() * rate), float(accel.mean())


def visual_signals(
    raw: IntervalTrack, aligned: IntervalTrack, rate: float = DEFAULT_RATE_HZ
) -> dict[str, float]:
    """The 20 per-participant summary signals.

    Landmark kinematics are computed per point on the aligned track and
    summed over the 68 points; pose and gaze kinematics come from the raw
    track so real head motion is preserved there.
    """
    if raw.n_intervals != aligned.n_intervals:
        raise ValueError("raw and aligned tracks must have equal lengths")
    out = {
        "Mean Number of Action Units": float(
            raw.au_presence.sum(axis=1).mean()
        ),
        "Mean Action Unit Intensity": float(raw.au_intensity.mean()),
    }
    lm = np.zeros(3)
    for k in range(N_LANDMARKS):
        lm += kinematics(aligned.landmarks[:, k, :], rate)
    for label, value in zip(("Displacement", "Velocity", "Acceleration"), lm):
        out[f"Mean Landmark {label}"] = float(value)

    channels = {
        "Head Translation": raw.translation,
        "Head Pitch": raw.rotation[:, 0],
        "Head Yaw": raw.rotation[:, 1],
        "Head Roll": raw.rotation[:, 2],
        "Gaze Angle": raw.gaze,
    }
    for prefix, series in channels.items():
        d, v, a = kinematics(series, rate)
        out[f"{prefix} Displacement"] = d
        out[f"{prefix} Velocity"] = v
        out[f"{prefix} Acceleration"] = a

    for name, value in out.items():
        if not np.isfinite(value):
            raise NonFiniteValueError(f"signal {name!r} is non-finite")
        if value < 0 and ("Displacement" in name or "Velocity" in name
                          or "Acceleration" in name):
            raise ValueError(f"signal {name!r} must be non-negative")
    return out


def visual_feature_table(
    tracks: dict[str, FrameTrack],
    window: int = DEFAULT_WINDOW,
    exclude_untracked: bool = False,
    rate: float | None = None,
) -> FeatureTable:
    """Extract the 20 signals for every participant into one FeatureTable.

    The reference face is the mean over all participants' interval tracks,
    so alignment is relative to the shared average face.
    """
    if not tracks:
        raise EmptyInputError("no tracks given")
    if rate is None:
        rate = 30.0 / window
    ids = tuple(sorted(tracks))
    intervals = {}
    for pid in ids:
        track = tracks[pid]
        if exclude_untracked:
            track = drop_untracked(track)
        intervals[pid] = downsample(track, window)
    reference = reference_face(intervals.values())
    rows = []
    for pid in ids:
        raw = intervals[pid]
        aligned = align_landmarks(raw, reference)
        signals = visual_signals(raw, aligned, rate)
        rows.append([signals[name] for name in VISUAL_SIGNAL_NAMES])
    return FeatureTable(
        participant_ids=ids,
        feature_names=VISUAL_SIGNAL_NAMES,
        modalities=("visual",) * len(VISUAL_SIGNAL_NAMES),
        values=np.asarray(rows, dtype=float),
    )
