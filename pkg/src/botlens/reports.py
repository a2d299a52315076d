"""JSON report files, SVG charts and plain-text tables.

Timestamps come from ``SOURCE_DATE_EPOCH`` when it is set, which makes two
runs with the same seeds produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

from botlens.errors import DataError

SVG_TOP = 30


def now() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        try:
            moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        except ValueError as exc:
            raise DataError(f"SOURCE_DATE_EPOCH is not an integer: {epoch!r}") from exc
    else:
        moment = datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def stamp(doc: dict, started: str) -> dict:
    out = dict(doc)
    out["timestamps"] = {"started": started, "finished": now()}
    return out


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such report: {path}", "missing_file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc.msg})", "bad_report") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: report must be a JSON object", "bad_report")
    return doc


# -- SVG -------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def bar_chart_svg(labels, values, title: str, top: int = SVG_TOP) -> str:
    """Horizontal bars, largest first, at most ``top`` rows."""
    pairs = sorted(zip(labels, values), key=lambda p: -p[1])[:top]
    label_w, bar_w, row_h, pad = 210, 360, 18, 10
    height = pad * 2 + 24 + row_h * len(pairs)
    width = label_w + bar_w + 80
    peak = max((abs(v) for _, v in pairs), default=0.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{pad}" y="{pad + 12}" font-size="13" font-weight="bold">{escape(title)}</text>',
    ]
    for i, (name, v) in enumerate(pairs):
        y = pad + 24 + i * row_h
        w = bar_w * max(v, 0.0) / peak
        parts.append(f'<text x="{label_w - 6}" y="{y + 12}" text-anchor="end">{escape(str(name))}</text>')
        parts.append(f'<rect x="{label_w}" y="{y + 2}" width="{w:.2f}" height="{row_h - 5}" fill="#4477aa"/>')
        parts.append(f'<text x="{label_w + w + 4:.2f}" y="{y + 12}">{_fmt(v)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def grouped_bar_svg(groups, series, values, title: str) -> str:
    """One panel per group, one bar per series inside each panel.

    ``values[g][s]`` is the height of series ``s`` in group ``g``. Panels are
    scaled independently since accuracy and counts live on different axes.
    """
    colors = ("#4477aa", "#ee6677", "#228833", "#ccbb44")
    panel_w, panel_h, pad, bar_w = 220, 180, 30, 50
    width = pad + len(groups) * (panel_w + pad)
    height = panel_h + 110
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{pad}" y="20" font-size="13" font-weight="bold">{escape(title)}</text>',
    ]
    base_y = 40 + panel_h
    for g, group in enumerate(groups):
        x0 = pad + g * (panel_w + pad)
        peak = max((abs(v) for v in values[g]), default=0.0) or 1.0
        parts.append(f'<line x1="{x0}" y1="{base_y}" x2="{x0 + panel_w}" y2="{base_y}" stroke="#333"/>')
        for s, v in enumerate(values[g]):
            h = panel_h * max(v, 0.0) / peak
            x = x0 + 20 + s * (bar_w + 20)
            parts.append(
                f'<rect x="{x}" y="{base_y - h:.2f}" width="{bar_w}" height="{h:.2f}" '
                f'fill="{colors[s % len(colors)]}"/>'
            )
            parts.append(f'<text x="{x + bar_w / 2}" y="{base_y - h - 4:.2f}" text-anchor="middle">{_fmt(v)}</text>')
        parts.append(f'<text x="{x0 + panel_w / 2}" y="{base_y + 18}" text-anchor="middle">{escape(group)}</text>')
    for s, name in enumerate(series):
        y = base_y + 40 + s * 16
        parts.append(f'<rect x="{pad}" y="{y - 9}" width="10" height="10" fill="{colors[s % len(colors)]}"/>')
        parts.append(f'<text x="{pad + 16}" y="{y}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- rendering stored reports ------------------------------------------------


def _weights(doc: dict) -> tuple[list[str], list[float]]:
    ws = doc.get("weights") or doc.get("importance", {}).get("weights")
    if not ws:
        raise DataError("report has no feature weights to chart", "bad_report")
    return [w["feature"] for w in ws], [float(w["value"]) for w in ws]


def render_svg(doc: dict, drop_top: bool = False) -> str:
    kind = doc.get("experiment")
    if kind == "heavy_user_refinement":
        b, t = doc["baseline"], doc["treatment"]
        return grouped_bar_svg(
            ["accuracy", "human -> bot false positives"],
            ["binary", "three-class"],
            [[b["accuracy"], t["accuracy"]], [b["false_positive_count"], t["false_positive_count"]]],
            "Binary vs three-class",
        )
    if kind == "feature_deletion":
        removed = ", ".join(doc["removed_features"]) or "nothing"
        return grouped_bar_svg(
            ["validation accuracy"],
            ["baseline", f"without {removed}"],
            [[doc["baseline"]["accuracy"], doc["treatment"]["accuracy"]]],
            f"Deletion ({doc.get('explainer', '')})",
        )
    names, values = _weights(doc)
    if drop_top and names:
        order = sorted(range(len(values)), key=lambda i: -values[i])
        skip = order[0]
        names = [n for i, n in enumerate(names) if i != skip]
        values = [v for i, v in enumerate(values) if i != skip]
    method = doc.get("method") or doc.get("importance", {}).get("method", "importance")
    return bar_chart_svg(names, values, f"Top features ({method})")


def _metrics_lines(label: str, m: dict) -> list[str]:
    lines = [f"{label}: accuracy {m['accuracy']:.4f}, false positives {m['false_positive_count']}"]
    classes = m["classes"]
    width = max(len(c) for c in classes) + 2
    lines.append(" " * width + "".join(c.rjust(width) for c in classes) + "   (rows true, cols predicted)")
    for c, row in zip(classes, m["confusion"]):
        lines.append(c.rjust(width) + "".join(str(v).rjust(width) for v in row))
    return lines


def render_text(doc: dict, top: Optional[int] = SVG_TOP) -> str:
    lines = []
    kind = doc.get("experiment")
    if "seed" in doc:
        lines.append(f"seed: {doc['seed']}")
    if kind in ("feature_deletion", "heavy_user_refinement", "train"):
        lines.append(f"experiment: {kind}")
        if kind == "feature_deletion":
            lines.append(f"removed: {', '.join(doc['removed_features']) or '(none)'}")
        if kind == "heavy_user_refinement":
            rule = doc["rule"]
            conds = " and ".join(f"{f} >= {_fmt(t)}" for f, t in zip(rule["features"], rule["thresholds"]))
            lines.append(f"rule: {conds}")
            lines.append(f"relabeled: {doc['relabeled_count']}")
            lines.append(f"false positives: {doc['fp_before']} -> {doc['fp_after']}")
        if "baseline" in doc:
            lines += _metrics_lines("baseline", doc["baseline"])
            lines += _metrics_lines("treatment", doc["treatment"])
            lines.append(f"delta: {doc['delta']:+.4f}")
        if "metrics" in doc:
            lines += _metrics_lines("validation", doc["metrics"])
        return "\n".join(lines) + "\n"
    names, values = _weights(doc)
    order = sorted(range(len(values)), key=lambda i: -values[i])
    if top is not None:
        order = order[:top]
    width = max(len(names[i]) for i in order) if order else 0
    method = doc.get("method") or doc.get("importance", {}).get("method", "")
    lines.append(f"method: {method}")
    for rank, i in enumerate(order, 1):
        lines.append(f"{rank:>3}  {names[i].ljust(width)}  {values[i]: .6g}")
    return "\n".join(lines) + "\n"
