"""Aggregation of daily decompositions into report tables.

Takes the per-day outputs of the detection/estimation/test stages and
produces the empirical summaries: co-jump share of quadratic
covariation, the correlation-impact regression, the announcement
logit, intraday co-jump histograms, and the shift/rotation breakdown
by announcement status.

Regressions are solved by hand on purpose: OLS via normal equations
with an HC0 sandwich, the logit by iteratively reweighted least
squares, both cross-checked in the test suite against independent
routes.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from zoneinfo import ZoneInfo

import numpy as np

from .ticks import SessionSpec

LABELS = ("UpShift", "DownShift", "Rotation")


class DegenerateFit(ValueError):
    """A regression or logit has no defined solution on this input."""


class CompleteSeparation(DegenerateFit):
    """The logit likelihood is unbounded; no finite estimates exist."""


@dataclass(frozen=True)
class Announcement:
    date: dt.date
    time: dt.time
    timezone: str


@dataclass(frozen=True)
class AnnouncementCalendar:
    """Scheduled events plus relative attribution windows in minutes."""

    events: tuple
    windows: tuple  # ((offset_start_min, offset_end_min), ...)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "windows", tuple((float(a), float(b)) for a, b in self.windows))
        if not self.windows:
            raise ValueError("at least one window rule is required")
        for a, b in self.windows:
            if not b > a:
                raise ValueError(f"window ({a}, {b}) has non-positive length")

    def dates(self) -> frozenset:
        return frozenset(e.date for e in self.events)

    def windows_on(self, date: dt.date) -> list:
        """Absolute [start, end) windows for the events of one date."""
        out = []
        for e in self.events:
            if e.date != date:
                continue
            anchor = dt.datetime.combine(e.date, e.time, tzinfo=ZoneInfo(e.timezone))
            for a, b in self.windows:
                out.append((anchor + dt.timedelta(minutes=a), anchor + dt.timedelta(minutes=b)))
        return out


@dataclass(frozen=True)
class CoJumpEvent:
    """One simultaneous jump: grid index, interval left endpoint, sizes."""

    index: int
    time: dt.datetime
    sizes: tuple


@dataclass
class DayDecomposition:
    """Final per-day, per-pair record entering the report stage."""

    date: dt.date
    pair: tuple
    qv: float
    ic: float
    cj: float
    classification: str
    events: tuple = ()
    corr_total: float = float("nan")
    corr_cont: float = float("nan")
    z: float = float("nan")
    p_value: float = float("nan")
    rejected: bool = False
    inconclusive: bool = False

    def __post_init__(self):
        # Co-jump variation exists only on days the test attributes one.
        if self.classification != "co_jump" and self.cj != 0.0:
            raise ValueError("CJ must be zero unless the day is classified co_jump")
        if self.classification != "co_jump" and self.events:
            raise ValueError("co-jump events require a co_jump classification")


def cj_qv_summary(decomps: list) -> list:
    """Per-pair totals: co-jump day count, QV total, mean 100*CJ/QV.

    The percentage averages the daily ratio over all days with QV != 0
    (not only co-jump days), so jump-free days pull it toward zero.
    """
    if not decomps:
        raise ValueError("no decompositions to summarize")
    by_pair: dict = {}
    for rec in decomps:
        by_pair.setdefault(rec.pair, []).append(rec)
    rows = []
    for pair in sorted(by_pair):
        recs = by_pair[pair]
        days_cj = sum(1 for r in recs if r.cj != 0.0)
        qv_total = float(sum(r.qv for r in recs))
        ratios = [100.0 * r.cj / r.qv for r in recs if r.qv != 0.0]
        pct = float(np.mean(ratios)) if ratios else 0.0
        rows.append({"pair": pair, "days_cj": days_cj, "qv_total": qv_total, "pct_cj_qv": pct})
    return rows


@dataclass
class RegressionResult:
    alpha: float
    beta: float
    r_squared: float
    wald_stat: float
    wald_p: float
    se_alpha: float
    se_beta: float
    n_obs: int


def correlation_impact_regression(total_corr, cont_corr) -> RegressionResult:
    """OLS of the total correlation on the continuous correlation.

    Fits total = alpha + beta * cont with an HC0 (plain White) sandwich
    covariance and a Wald test of the joint null alpha = 0, beta = 1
    against chi-square(2). Identical correlations therefore accept.
    """
    y = np.asarray(total_corr, dtype=float)
    x = np.asarray(cont_corr, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ValueError("need two equal-length daily series")
    n = y.size
    if n < 3:
        raise ValueError("need at least 3 paired observations")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValueError("series must be finite")
    if float(np.var(x)) == 0.0:
        raise DegenerateFit("regressor has zero variance")
    design = np.column_stack([np.ones(n), x])
    xtx = design.T @ design
    theta = np.linalg.solve(xtx, design.T @ y)
    resid = y - design @ theta
    sst = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(resid @ resid) / sst if sst > 0.0 else 1.0
    delta = theta - np.array([0.0, 1.0])
    scale = max(float(np.max(np.abs(y))), 1e-30)
    if float(np.max(np.abs(resid))) <= 1e-12 * scale:
        # Exact fit: the sandwich is singular and the Wald ratio would be
        # 0/0 round-off. The hypothesis is then decided by theta alone.
        on_null = abs(delta[0]) <= 1e-9 * scale and abs(delta[1]) <= 1e-9
        wald = 0.0 if on_null else math.inf
        cov = np.zeros((2, 2))
    else:
        bread = np.linalg.inv(xtx)
        meat = design.T @ (design * (resid**2)[:, None])
        cov = bread @ meat @ bread
        wald = float(delta @ np.linalg.solve(cov, delta))
    # chi-square(2) survival function in closed form.
    wald_p = math.exp(-wald / 2.0)
    return RegressionResult(
        alpha=float(theta[0]),
        beta=float(theta[1]),
        r_squared=float(r_squared),
        wald_stat=wald,
        wald_p=wald_p,
        se_alpha=float(math.sqrt(cov[0, 0])),
        se_beta=float(math.sqrt(cov[1, 1])),
        n_obs=n,
    )


@dataclass
class LogitResult:
    beta0: float
    beta1: float
    se_beta0: float
    se_beta1: float
    pseudo_r_squared: float
    loglik: float
    n_iter: int


def _logit_loglik(y: np.ndarray, p: np.ndarray) -> float:
    eps = 1e-300
    return float(np.sum(y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps)))


def announcement_logit(cojump_indicator, news_indicator) -> LogitResult:
    """Logistic fit of the daily co-jump indicator on a news indicator.

    Maximum likelihood by iteratively reweighted least squares, stopped
    when the log-likelihood moves less than 1e-10 (at most 100 sweeps).
    McFadden's 1 - l/l0 is reported as the pseudo R-squared. Binary
    regressors are screened for empty outcome cells first, since those
    push a coefficient to infinity.
    """
    y = np.asarray(cojump_indicator, dtype=float)
    x = np.asarray(news_indicator, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ValueError("need two equal-length daily indicator series")
    if not (set(np.unique(y)) <= {0.0, 1.0}):
        raise ValueError("outcome must be 0/1")
    if y.min() == y.max():
        raise ValueError("both outcome classes must be present")
    if x.min() == x.max():
        raise CompleteSeparation("news indicator is constant; no contrast")
    if set(np.unique(x)) <= {0.0, 1.0}:
        for xv in (0.0, 1.0):
            sub = y[x == xv]
            if sub.size and (sub.min() == sub.max()):
                raise CompleteSeparation(
                    f"outcome is constant ({int(sub[0])}) on the news={int(xv)} cell"
                )
    n = y.size
    design = np.column_stack([np.ones(n), x])
    beta = np.zeros(2)
    ll_old = _logit_loglik(y, np.full(n, 0.5))
    n_iter = 0
    for n_iter in range(1, 101):
        eta = design @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        # Newton step in IRLS form: working response z = eta + (y-p)/w.
        wz = w * eta + (y - p)
        xtwx = design.T @ (design * w[:, None])
        beta = np.linalg.solve(xtwx, design.T @ wz)
        ll_new = _logit_loglik(y, 1.0 / (1.0 + np.exp(-(design @ beta))))
        if abs(ll_new - ll_old) < 1e-10:
            ll_old = ll_new
            break
        ll_old = ll_new
    p = 1.0 / (1.0 + np.exp(-(design @ beta)))
    w = p * (1.0 - p)
    cov = np.linalg.inv(design.T @ (design * w[:, None]))
    p_null = float(y.mean())
    ll_null = _logit_loglik(y, np.full(n, p_null))
    pseudo = 1.0 - ll_old / ll_null if ll_null != 0.0 else 0.0
    return LogitResult(
        beta0=float(beta[0]),
        beta1=float(beta[1]),
        se_beta0=float(math.sqrt(cov[0, 0])),
        se_beta1=float(math.sqrt(cov[1, 1])),
        pseudo_r_squared=float(pseudo),
        loglik=float(ll_old),
        n_iter=n_iter,
    )


def _require_zone(stamp: dt.datetime, zone: str, what: str) -> None:
    tz = stamp.tzinfo
    key = getattr(tz, "key", None)
    if key is None:
        raise TypeError(f"{what} timestamp {stamp!r} lacks an IANA timezone")
    if key != zone:
        raise TypeError(f"{what} timezone {key!r} does not match calendar zone {zone!r}")


def cojump_window_indicator(decomps: list, calendar: AnnouncementCalendar) -> dict:
    """Per-date 0/1: did any co-jump land inside an announcement window.

    Membership is [start, end) on the event's interval left endpoint.
    Event timestamps must carry the calendar's own timezone; differing
    or missing zones are an error, never converted behind the caller's
    back.
    """
    zones = {e.timezone for e in calendar.events}
    out: dict = {}
    for rec in decomps:
        hit = 0
        windows = calendar.windows_on(rec.date)
        for ev in rec.events:
            for zone in zones:
                _require_zone(ev.time, zone, "co-jump event")
            if any(a <= ev.time < b for a, b in windows):
                hit = 1
                break
        out[rec.date] = max(out.get(rec.date, 0), hit)
    return out


def intraday_histogram(event_times: list, bin_minutes: int, spec: SessionSpec):
    """Counts of events per wall-clock bin across the session.

    Returns (bin_starts, counts) where bin_starts are session-local
    times. ``bin_minutes`` must divide the session length; every event
    must fall inside the session.
    """
    width = bin_minutes * 60
    if width <= 0 or spec.session_seconds % width != 0:
        raise ValueError("bin width must divide the session length")
    n_bins = spec.session_seconds // width
    counts = np.zeros(n_bins, dtype=int)
    start = spec.session_start
    for t in event_times:
        local = t.astimezone(ZoneInfo(spec.timezone)).time() if t.tzinfo else t.time()
        offset = (
            (local.hour - start.hour) * 3600
            + (local.minute - start.minute) * 60
            + (local.second - start.second)
        )
        if not 0 <= offset < spec.session_seconds:
            raise ValueError(f"event at {t} outside the session")
        counts[offset // width] += 1
    base = dt.datetime(2000, 1, 3, start.hour, start.minute, start.second)
    bin_starts = [(base + dt.timedelta(seconds=i * width)).time() for i in range(n_bins)]
    return bin_starts, counts


def classify_shift_rotation(sizes) -> str:
    """Label a simultaneous jump tuple by the signs of its members.

    All members positive is an upward level shift, all negative a
    downward one, any sign mix a rotation. Scaling all sizes by a
    positive constant cannot change the label.
    """
    vals = [float(s) for s in sizes]
    if len(vals) < 2:
        raise ValueError("a co-jump tuple needs at least two members")
    if any(v == 0.0 for v in vals):
        raise ValueError("zero size: not a common jump across all members")
    if all(v > 0.0 for v in vals):
        return "UpShift"
    if all(v < 0.0 for v in vals):
        return "DownShift"
    return "Rotation"


def shift_rotation_table(day_labels: dict, calendar: AnnouncementCalendar, sample_dates) -> list:
    """Shift/rotation counts split by announcement status.

    ``day_labels`` maps dates with a co-jump to that day's label (one
    label per day; multi-event days are labeled upstream). Percentages
    are taken against the segment's day count, which is emitted so the
    shares can be renormalized.
    """
    ann = calendar.dates()
    segments = {"announcement": [], "non_announcement": []}
    for date in sample_dates:
        key = "announcement" if date in ann else "non_announcement"
        segments[key].append(date)
    rows = []
    for segment in ("announcement", "non_announcement"):
        dates = segments[segment]
        n_seg = len(dates)
        tally = {label: 0 for label in LABELS}
        days_cj = 0
        for date in dates:
            label = day_labels.get(date)
            if label is None:
                continue
            if label not in LABELS:
                raise ValueError(f"unknown label {label!r}")
            tally[label] += 1
            days_cj += 1
        def pct(count: int) -> float:
            return 100.0 * count / n_seg if n_seg else 0.0
        rows.append(
            {
                "segment": segment,
                "n_rotation": tally["Rotation"],
                "pct_rotation": pct(tally["Rotation"]),
                "n_up_shift": tally["UpShift"],
                "pct_up_shift": pct(tally["UpShift"]),
                "n_down_shift": tally["DownShift"],
                "pct_down_shift": pct(tally["DownShift"]),
                "n_days_cj": days_cj,
                "pct_days_cj": pct(days_cj),
                "n_segment_days": n_seg,
            }
        )
    return rows


def _write_rows(path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain float repr even for numpy scalars
    return str(value)


def write_cj_qv_table(rows: list, path) -> None:
    """Co-jump share table: pair, days_cj, qv_total, pct_cj_qv."""
    out = [
        ["-".join(r["pair"]), r["days_cj"], _fmt(r["qv_total"]), _fmt(r["pct_cj_qv"])]
        for r in rows
    ]
    _write_rows(path, ["pair", "days_cj", "qv_total", "pct_cj_qv"], out)


def write_regression_table(rows: list, path) -> None:
    """Correlation regression table: pair, alpha, beta, r_squared, wald_p."""
    out = []
    for pair, res in rows:
        if res is None:
            out.append(["-".join(pair), "", "", "", ""])
        else:
            out.append(
                [
                    "-".join(pair),
                    _fmt(res.alpha),
                    _fmt(res.beta),
                    _fmt(res.r_squared),
                    _fmt(res.wald_p),
                ]
            )
    _write_rows(path, ["pair", "alpha", "beta", "r_squared", "wald_p"], out)


def write_logit_table(rows: list, path) -> None:
    """Announcement logit table: pair, beta0, beta1, ses, pseudo R2."""
    out = []
    for pair, res in rows:
        if res is None:
            out.append(["-".join(pair), "", "", "", "", ""])
        else:
            out.append(
                [
                    "-".join(pair),
                    _fmt(res.beta0),
                    _fmt(res.beta1),
                    _fmt(res.se_beta0),
                    _fmt(res.se_beta1),
                    _fmt(res.pseudo_r_squared),
                ]
            )
    _write_rows(
        path,
        ["pair", "beta0", "beta1", "se_beta0", "se_beta1", "pseudo_r_squared"],
        out,
    )


def write_shift_rotation_table(rows_by_tuple: list, path) -> None:
    """Shift/rotation table keyed by instrument tuple and segment."""
    out = []
    for name, rows in rows_by_tuple:
        for r in rows:
            out.append(
                [
                    name,
                    r["segment"],
                    r["n_rotation"],
                    _fmt(r["pct_rotation"]),
                    r["n_up_shift"],
                    _fmt(r["pct_up_shift"]),
                    r["n_down_shift"],
                    _fmt(r["pct_down_shift"]),
                    r["n_days_cj"],
                    _fmt(r["pct_days_cj"]),
                    r["n_segment_days"],
                ]
            )
    _write_rows(
        path,
        [
            "tuple",
            "segment",
            "n_rotation",
            "pct_rotation",
            "n_up_shift",
            "pct_up_shift",
            "n_down_shift",
            "pct_down_shift",
            "n_days_cj",
            "pct_days_cj",
            "n_segment_days",
        ],
        out,
    )


def write_histogram(bin_starts: list, counts, path) -> None:
    rows = [[t.strftime("%H:%M:%S"), int(c)] for t, c in zip(bin_starts, counts)]
    _write_rows(path, ["bin_start", "count"], rows)
